import string
from typing import List

_PUNCTUATION = str.maketrans("", "", string.punctuation)


def tokenize(sentence: str) -> List[str]:
    """Lower-cases, strips ASCII punctuation and splits on whitespace."""
    return sentence.lower().translate(_PUNCTUATION).split()


def detokenize(tokens: List[str]) -> str:
    return " ".join(tokens)
