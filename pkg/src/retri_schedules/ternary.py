"""
Integer machinery for ring schedules: centered residues, balanced-ternary and
binary digit decompositions, and the peer function.

Digits are always stored least-significant first, so digit k is the one consumed
in communication phase k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUPPORTED_RADICES = (2, 3)


def phase_count(n, radix):
    """Number of phases ceil(log_radix n), in exact integer arithmetic.

    Parameters
    ----------
    n : int
        ring size, n >= 1
    radix : {2, 3}
        growth factor of the schedule

    Returns
    -------
    s : int
        smallest s with radix**s >= n
    """
    _check_radix(radix)
    if n < 1:
        raise ValueError(f"Ring size must be positive, got {n}")
    s, reach = 0, 1
    while reach < n:
        reach *= radix
        s += 1
    return s


def padded_size(n, radix):
    """Smallest power of `radix` that is >= n."""
    return radix ** phase_count(n, radix)


def phase_count_ratio(n):
    """Ratio of radix-2 to radix-3 phases, log_2 n / log_3 n, for n > 1."""
    if n <= 1:
        raise ValueError(f"Phase ratio needs n > 1, got {n}")
    return math.log2(n) / math.log(n, 3)


def _check_radix(radix):
    if radix not in SUPPORTED_RADICES:
        raise ValueError(f"Unsupported radix {radix}, must be one of {SUPPORTED_RADICES}")


@dataclass(frozen=True)
class RingConfig:
    """Ring size and radix of a log-phase schedule.

    Non-canonical sizes are allowed here; schedule generation pads them to
    `padded_n` virtual nodes.
    """

    n: int
    radix: int

    def __post_init__(self):
        _check_radix(self.radix)
        if self.n < 2:
            raise ValueError(f"Ring size must be at least 2, got {self.n}")

    @property
    def s(self):
        return phase_count(self.n, self.radix)

    @property
    def padded_n(self):
        return self.radix**self.s

    @property
    def is_canonical(self):
        return self.n == self.padded_n


def ucr(offset, n):
    """Unique centered representative of `offset` modulo an odd `n`.

    Parameters
    ----------
    offset : int
        ring distance in [0, n)
    n : int
        odd ring size

    Returns
    -------
    int
        value congruent to offset (mod n) in [-(n-1)/2, (n-1)/2]
    """
    if n < 1 or n % 2 == 0:
        raise ValueError(f"Centered representative requires odd n, got {n}")
    if not 0 <= offset < n:
        raise ValueError(f"Offset {offset} outside [0, {n})")
    return offset - n if offset > (n - 1) // 2 else offset


def max_balanced_offset(s):
    """Largest |offset| representable with s balanced-ternary digits."""
    return (3**s - 1) // 2


def balanced_ternary_digits(delta, s):
    """Balanced-ternary digits of a centered offset.

    Parameters
    ----------
    delta : int
        centered offset, |delta| <= (3**s - 1) / 2
    s : int
        number of digits

    Returns
    -------
    tuple of int
        digits tau_0 ... tau_{s-1} in {-1, 0, +1} with sum(tau_k * 3**k) == delta
    """
    limit = max_balanced_offset(s)
    if abs(delta) > limit:
        raise ValueError(f"Offset {delta} not representable with {s} balanced digits (|x| <= {limit})")
    digits = []
    x = delta
    for _ in range(s):
        # remainder 2 becomes -1 with a carry into the next digit
        digit = (x + 1) % 3 - 1
        digits.append(digit)
        x = (x - digit) // 3
    return tuple(digits)


def digits_to_offset(digits):
    """Integer value sum(digit_k * 3**k) of a least-significant-first digit vector."""
    return sum(int(d) * 3**k for k, d in enumerate(digits))


def balanced_ternary_table(n):
    """Balanced-ternary digits of every ring offset 0..n-1 for n = 3**s.

    Row `offset` holds the digits of ucr(offset, n).

    Parameters
    ----------
    n : int
        power-of-three ring size

    Returns
    -------
    np.ndarray of shape (n, s), dtype int8
    """
    s = phase_count(n, 3)
    if 3**s != n:
        raise ValueError(f"Digit table requires a power of three, got {n}")
    offsets = np.arange(n, dtype=np.int64)
    x = np.where(offsets > (n - 1) // 2, offsets - n, offsets)
    table = np.empty((n, s), dtype=np.int8)
    for k in range(s):
        digit = (x + 1) % 3 - 1
        table[:, k] = digit
        x = (x - digit) // 3
    return table


def binary_digits(offset, s):
    """Base-2 digits of `offset`, least significant first.

    Parameters
    ----------
    offset : int
        ring distance in [0, 2**s)
    s : int
        number of digits

    Returns
    -------
    tuple of int
    """
    if not 0 <= offset < 2**s:
        raise ValueError(f"Offset {offset} outside [0, {2**s})")
    return tuple((offset >> k) & 1 for k in range(s))


def binary_table(n):
    """Binary digits of every offset 0..n-1 for n = 2**s, shape (n, s)."""
    s = phase_count(n, 2)
    if 2**s != n:
        raise ValueError(f"Digit table requires a power of two, got {n}")
    offsets = np.arange(n, dtype=np.int64)
    return ((offsets[:, None] >> np.arange(s)) & 1).astype(np.int8)


def peers(r, k, n, radix=3):
    """Left and right peer of node r in phase k: (r -/+ radix**k) mod n."""
    if not 0 <= r < n:
        raise ValueError(f"Node {r} outside ring of size {n}")
    step = radix**k
    return (r - step) % n, (r + step) % n
