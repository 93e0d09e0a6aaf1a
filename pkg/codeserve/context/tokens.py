import math
from functools import lru_cache

from django.utils.module_loading import import_string


class TokenEstimator:
    """Interface for prompt size estimation. Subclasses implement estimate()."""

    def estimate(self, text):
        raise NotImplementedError

    def truncate(self, text, max_tokens):
        """Longest prefix of `text` whose estimate fits in max_tokens."""
        if self.estimate(text) <= max_tokens:
            return text
        low, high = 0, len(text)
        while low < high:
            mid = (low + high + 1) // 2
            if self.estimate(text[:mid]) <= max_tokens:
                low = mid
            else:
                high = mid - 1
        return text[:low]


class CharRatioEstimator(TokenEstimator):
    """ceil(characters / chars_per_token); tokenizer independent."""

    def __init__(self, chars_per_token=4):
        self.chars_per_token = chars_per_token

    def estimate(self, text):
        return math.ceil(len(text) / self.chars_per_token)


@lru_cache(maxsize=8)
def load_estimator(dotted_path, chars_per_token=4):
    estimator_class = import_string(dotted_path)
    if issubclass(estimator_class, CharRatioEstimator):
        return estimator_class(chars_per_token=chars_per_token)
    return estimator_class()
