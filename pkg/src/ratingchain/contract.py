"""TransparentRating contract state machine.

Owner grants rating rights, registered raters submit one 0-100 rating per
product, products carry a running integer average. Two averaging modes:

* ``corrected`` (default): keeps a cumulative sum so the stored rating is
  exactly floor(mean) of all accepted ratings.
* ``paper_literal``: applies the recurrence
  rating' = floor((rating + value) / (no_raters + 1)), with an out-of-range
  value silently accepted as a no-op.

All operations are pure with respect to the caller: they mutate the given
ContractState in place and raise ContractRevert on rejection; the ledger
layer is responsible for copy/rollback semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


REVERT_NOT_OWNER_GRANT = "Only owner can give right to rate."
REVERT_ALREADY_RATED = "The rater already rated."
REVERT_NO_RIGHT = "rater has no rating right"
REVERT_UNKNOWN_PRODUCT = "unknown product"
REVERT_OUT_OF_RANGE = "rating out of range"
REVERT_NOT_OWNER_CREATE = "only owner can create products"
REVERT_PRODUCT_EXISTS = "product exists"
REVERT_BAD_NAME = "invalid product name"

MAX_RATING = 100
MAX_NAME_BYTES = 64


class AveragingMode(str, Enum):
    CORRECTED = "corrected"
    PAPER_LITERAL = "paper_literal"


class ContractRevert(Exception):
    """Contract-level rejection; the reason string is an API contract value."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class ProductRecord:
    name: str
    rating: int = 0        # current truncated average, 0-100
    no_raters: int = 0
    cumulative: int = 0    # sum of accepted values; unused in paper_literal mode


@dataclass
class RaterRecord:
    weight: int = 0        # 0 = no right, 1 = may rate
    id: int = 0            # registration ordinal
    rated_products: set[bytes] = field(default_factory=set)
    rate: int = 0          # last submitted value


@dataclass
class ContractState:
    owner: bytes
    products: dict[bytes, ProductRecord] = field(default_factory=dict)
    raters: dict[bytes, RaterRecord] = field(default_factory=dict)
    next_rater_id: int = 1


def give_right_to_rate(state: ContractState, caller: bytes, rater: bytes) -> None:
    if caller != state.owner:
        raise ContractRevert(REVERT_NOT_OWNER_GRANT)
    rec = state.raters.get(rater)
    if rec is None:
        rec = RaterRecord(weight=1, id=state.next_rater_id)
        state.next_rater_id += 1
        state.raters[rater] = rec
    else:
        rec.weight = 1  # idempotent on repeat grants


def set_rate(
    state: ContractState,
    caller: bytes,
    product: bytes,
    value: int,
    mode: AveragingMode = AveragingMode.CORRECTED,
) -> None:
    rater = state.raters.get(caller)
    if rater is None or rater.weight == 0:
        raise ContractRevert(REVERT_NO_RIGHT)
    rec = state.products.get(product)
    if rec is None:
        raise ContractRevert(REVERT_UNKNOWN_PRODUCT)
    if product in rater.rated_products:
        raise ContractRevert(REVERT_ALREADY_RATED)
    if value > MAX_RATING:
        if mode is AveragingMode.PAPER_LITERAL:
            return  # silent no-op, mirroring the if-guard with no else branch
        raise ContractRevert(REVERT_OUT_OF_RANGE)

    if mode is AveragingMode.PAPER_LITERAL:
        rec.rating = (rec.rating + value) // (rec.no_raters + 1)
        rec.no_raters += 1
    else:
        rec.cumulative += value
        rec.no_raters += 1
        rec.rating = rec.cumulative // rec.no_raters
    rater.rated_products.add(product)
    rater.rate = value


def get_rate(state: ContractState, product: bytes) -> tuple[int, int, bool]:
    """Return (rating, no_raters, found); unknown products read as 0."""
    rec = state.products.get(product)
    if rec is None:
        return 0, 0, False
    return rec.rating, rec.no_raters, True


def create_product(state: ContractState, caller: bytes, product: bytes, name: str) -> None:
    if caller != state.owner:
        raise ContractRevert(REVERT_NOT_OWNER_CREATE)
    if product in state.products:
        raise ContractRevert(REVERT_PRODUCT_EXISTS)
    raw = name.encode("utf-8")
    if not 1 <= len(raw) <= MAX_NAME_BYTES:
        raise ContractRevert(REVERT_BAD_NAME)
    state.products[product] = ProductRecord(name=name)
