import logging
from collections import Counter
from typing import Dict, Iterable, List, Sequence

from dataio.text import tokenize
from utils.errors import InvalidInputError

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)


class Vocabulary:
    """Dense token <-> index bijection; indices 0..3 are PAD, BOS, EOS, UNK."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:len(RESERVED)]) != RESERVED:
            raise InvalidInputError(f"Vocabulary must start with the reserved tokens {RESERVED}")
        if len(set(tokens)) != len(tokens):
            raise InvalidInputError("Vocabulary tokens must be distinct")
        self._tokens: List[str] = tokens
        self._index: Dict[str, int] = {token: i for i, token in enumerate(tokens)}

    pad_index = 0
    bos_index = 1
    eos_index = 2
    unk_index = 3

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def tokens(self) -> List[str]:
        return list(self._tokens)

    def index(self, token: str) -> int:
        return self._index.get(token, self.unk_index)

    def token(self, index: int) -> str:
        return self._tokens[index]

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.index(t) for t in tokens]

    def decode(self, indices: Iterable[int], strip_special: bool = True) -> List[str]:
        words = []
        for i in indices:
            i = int(i)
            if strip_special and i in (self.pad_index, self.bos_index):
                continue
            if strip_special and i == self.eos_index:
                break
            words.append(self._tokens[i])
        return words


def build_vocabulary(records, min_count: int = 1) -> Vocabulary:
    """
    Builds a vocabulary from caption records.

    Tokens with at least ``min_count`` occurrences are kept, ordered by
    descending frequency and then lexicographically.
    """
    counts = Counter()
    sentences = 0
    for record in records:
        for sentence in record.sentences:
            counts.update(tokenize(sentence))
            sentences += 1
    if sentences == 0:
        raise InvalidInputError("Cannot build a vocabulary from an empty corpus")
    kept = sorted((t for t, c in counts.items() if c >= min_count and t not in RESERVED), key=lambda t: (-counts[t], t))
    logging.getLogger("Vocabulary").info(f"📚 Vocabulary: {len(kept)} words from {sentences} sentences (min_count={min_count})")
    return Vocabulary(list(RESERVED) + kept)
