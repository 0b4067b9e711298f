"""Transactions, blocks, chain state, canonical serialization, and fees.

Canonical byte layout (bit-exact across implementations): integers are
big-endian fixed width (u64 unless stated; wei amounts u128), strings are
u32-length-prefixed UTF-8, transaction lists are u32-count-prefixed,
addresses/digests/keys are raw bytes. Fee accounting follows
fee = gas_used * gas_price with per-function intrinsic gas.
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from . import contract as rc
from .contract import AveragingMode, ContractRevert, ContractState
from .crypto import (
    ADDRESS_LEN,
    DIGEST_LEN,
    PUBKEY_LEN,
    SIGNATURE_LEN,
    derive_address,
    hash32,
    sign,
    verify,
)

U64_MAX = 2**64 - 1
U128_MAX = 2**128 - 1

DEFAULT_GAS_LIMIT = 6721975
DEFAULT_CHAIN_ID = 5777
DEFAULT_SLOT_DEADLINE = 2  # logical seconds


class CallFn(str, Enum):
    GIVE_RIGHT_TO_RATE = "GiveRightToRate"
    SET_RATE = "SetRate"
    GET_RATE = "GetRate"
    CREATE_PRODUCT = "CreateProduct"
    FAUCET_MINT = "FaucetMint"


FN_TAGS = {
    CallFn.GIVE_RIGHT_TO_RATE: 0,
    CallFn.SET_RATE: 1,
    CallFn.GET_RATE: 2,
    CallFn.CREATE_PRODUCT: 3,
    CallFn.FAUCET_MINT: 4,
}
TAG_FNS = {v: k for k, v in FN_TAGS.items()}


@dataclass(frozen=True)
class GasSchedule:
    set_rate: int = 51456
    get_rate: int = 42689
    give_right_to_rate: int = 47800
    create_product: int = 53000  # configured; not a published figure

    def intrinsic_gas(self, fn: CallFn) -> int:
        return {
            CallFn.SET_RATE: self.set_rate,
            CallFn.GET_RATE: self.get_rate,
            CallFn.GIVE_RIGHT_TO_RATE: self.give_right_to_rate,
            CallFn.CREATE_PRODUCT: self.create_product,
            CallFn.FAUCET_MINT: 0,
        }[fn]


class TxInvalid(Exception):
    """Structural rejection: the transaction never enters a block."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


class BlockInvalid(Exception):
    """Named violation; the whole block is rejected."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


class ArithmeticOverflow(TxInvalid):
    def __init__(self, detail: str = ""):
        super().__init__("Overflow", detail)


@dataclass(frozen=True)
class CallPayload:
    function: CallFn
    product: Optional[bytes] = None
    rater: Optional[bytes] = None
    value: Optional[int] = None   # SetRate raw rating value, 0-255 on the wire
    name: Optional[str] = None

    def check_shape(self) -> None:
        fn = self.function
        if fn == CallFn.GIVE_RIGHT_TO_RATE:
            ok = self.rater is not None and self.product is None and self.value is None and self.name is None
        elif fn == CallFn.SET_RATE:
            ok = (
                self.product is not None
                and self.value is not None
                and 0 <= self.value <= 255
                and self.rater is None
                and self.name is None
            )
        elif fn == CallFn.GET_RATE:
            ok = self.product is not None and self.rater is None and self.value is None and self.name is None
        elif fn == CallFn.CREATE_PRODUCT:
            ok = self.product is not None and self.name is not None and self.rater is None and self.value is None
        elif fn == CallFn.FAUCET_MINT:
            ok = self.product is None and self.rater is None and self.value is None and self.name is None
        else:  # pragma: no cover - enum is closed
            ok = False
        if not ok:
            raise TxInvalid("UnknownFunction", f"malformed args for {fn.value}")


@dataclass(frozen=True)
class Transaction:
    nonce: int
    sender: bytes            # 20-byte address, must match sender_pubkey
    sender_pubkey: bytes     # 32 bytes; carried because Ed25519 has no recovery
    to: bytes
    value: int               # wei, u128
    gas_limit: int
    gas_price: int
    call: CallPayload
    signature: bytes = b""

    def unsigned_bytes(self) -> bytes:
        parts = [
            struct.pack(">Q", self.nonce),
            self.sender_pubkey,
            self.sender,
            self.to,
            self.value.to_bytes(16, "big"),
            struct.pack(">Q", self.gas_limit),
            struct.pack(">Q", self.gas_price),
            struct.pack(">B", FN_TAGS[self.call.function]),
        ]
        c = self.call
        if c.function == CallFn.GIVE_RIGHT_TO_RATE:
            parts.append(c.rater)
        elif c.function == CallFn.SET_RATE:
            parts.append(c.product)
            parts.append(struct.pack(">B", c.value))
        elif c.function == CallFn.GET_RATE:
            parts.append(c.product)
        elif c.function == CallFn.CREATE_PRODUCT:
            raw = c.name.encode("utf-8")
            parts.append(c.product)
            parts.append(struct.pack(">I", len(raw)))
            parts.append(raw)
        return b"".join(parts)

    def signed_bytes(self) -> bytes:
        return self.unsigned_bytes() + self.signature

    @property
    def tx_hash(self) -> bytes:
        return hash32(self.unsigned_bytes())

    def signed(self, secret_key: bytes) -> "Transaction":
        return replace(self, signature=sign(secret_key, self.unsigned_bytes()))


@dataclass(frozen=True)
class Block:
    number: int
    parent_hash: bytes
    timestamp: int
    proposer: bytes
    proposer_pubkey: bytes
    out_of_turn: bool
    gas_limit: int
    gas_used: int
    transactions: tuple[Transaction, ...]
    block_hash: bytes = b""
    proposer_signature: bytes = b""

    def canonical_bytes(self) -> bytes:
        parts = [
            struct.pack(">Q", self.number),
            self.parent_hash,
            struct.pack(">Q", self.timestamp),
            self.proposer,
            self.proposer_pubkey,
            struct.pack(">B", 1 if self.out_of_turn else 0),
            struct.pack(">Q", self.gas_limit),
            struct.pack(">Q", self.gas_used),
            struct.pack(">I", len(self.transactions)),
        ]
        parts.extend(tx.signed_bytes() for tx in self.transactions)
        return b"".join(parts)

    def compute_hash(self) -> bytes:
        return hash32(self.canonical_bytes())

    def sealed(self, secret_key: bytes) -> "Block":
        h = self.compute_hash()
        return replace(self, block_hash=h, proposer_signature=sign(secret_key, h))


@dataclass
class AccountState:
    balance: int = 0
    nonce: int = 0


@dataclass(frozen=True)
class Receipt:
    tx_hash: bytes
    block_number: int
    status: str              # "Success" | "Reverted"
    reason: str              # revert reason, empty on success
    gas_used: int
    fee_wei: int
    sender: bytes
    function: CallFn


@dataclass
class LedgerState:
    accounts: dict[bytes, AccountState] = field(default_factory=dict)
    contract: ContractState = None  # type: ignore[assignment]
    faucet_minted: int = 0

    def account(self, addr: bytes) -> AccountState:
        acct = self.accounts.get(addr)
        if acct is None:
            acct = AccountState()
            self.accounts[addr] = acct
        return acct

    def balance(self, addr: bytes) -> int:
        acct = self.accounts.get(addr)
        return acct.balance if acct else 0

    def total_balance(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    def digest(self) -> bytes:
        """Deterministic digest of the full state, for convergence checks."""
        parts = [struct.pack(">Q", len(self.accounts))]
        for addr in sorted(self.accounts):
            acct = self.accounts[addr]
            parts.append(addr)
            parts.append(acct.balance.to_bytes(16, "big"))
            parts.append(struct.pack(">Q", acct.nonce))
        c = self.contract
        parts.append(c.owner)
        parts.append(struct.pack(">Q", len(c.products)))
        for paddr in sorted(c.products):
            rec = c.products[paddr]
            raw = rec.name.encode("utf-8")
            parts.append(paddr)
            parts.append(struct.pack(">I", len(raw)))
            parts.append(raw)
            parts.append(struct.pack(">QQQ", rec.rating, rec.no_raters, rec.cumulative))
        parts.append(struct.pack(">Q", len(c.raters)))
        for raddr in sorted(c.raters):
            rr = c.raters[raddr]
            parts.append(raddr)
            parts.append(struct.pack(">QQQ", rr.weight, rr.id, rr.rate))
            parts.append(struct.pack(">I", len(rr.rated_products)))
            parts.extend(sorted(rr.rated_products))
        parts.append(self.faucet_minted.to_bytes(16, "big"))
        return hash32(b"".join(parts))


@dataclass(frozen=True)
class Genesis:
    chain_id: int = DEFAULT_CHAIN_ID
    gas_limit: int = DEFAULT_GAS_LIMIT
    slot_deadline_seconds: int = DEFAULT_SLOT_DEADLINE
    gas_price_suggestion: int = 2000000000
    authorities: tuple[bytes, ...] = ()
    owner: bytes = b"\x00" * ADDRESS_LEN
    contract_address: bytes = b"\x00" * ADDRESS_LEN
    mode: AveragingMode = AveragingMode.CORRECTED
    faucet_enabled: bool = True
    allocations: tuple[tuple[bytes, int], ...] = ()
    products: tuple[tuple[bytes, str], ...] = ()
    raters: tuple[bytes, ...] = ()  # pre-granted rating rights (demo/sim convenience)
    schedule: GasSchedule = GasSchedule()

    def __post_init__(self):
        if len(self.authorities) < 1:
            raise ValueError("genesis requires at least one authority")
        if len(set(self.authorities)) != len(self.authorities):
            raise ValueError("duplicate authority addresses in genesis")

    def genesis_hash(self) -> bytes:
        from .wire import genesis_to_json_bytes  # local import avoids a cycle

        return hash32(genesis_to_json_bytes(self))

    def initial_state(self) -> LedgerState:
        state = LedgerState(contract=ContractState(owner=self.owner))
        for addr, bal in self.allocations:
            state.account(addr).balance = bal
        for paddr, name in self.products:
            state.contract.products[paddr] = rc.ProductRecord(name=name)
        for raddr in self.raters:
            rc.give_right_to_rate(state.contract, self.owner, raddr)
        return state

    def genesis_total(self) -> int:
        return sum(bal for _, bal in self.allocations)


def compute_fee(gas_used: int, gas_price: int) -> int:
    """Fee in wei: gas_used * gas_price, exact integer arithmetic."""
    if gas_used < 0 or gas_price < 0:
        raise ArithmeticOverflow("negative operand")
    fee = gas_used * gas_price
    if fee > U128_MAX:
        raise ArithmeticOverflow("fee exceeds u128")
    return fee


def _check_structure(tx: Transaction) -> None:
    if len(tx.sender) != ADDRESS_LEN or len(tx.to) != ADDRESS_LEN:
        raise TxInvalid("BadAddress")
    if len(tx.sender_pubkey) != PUBKEY_LEN:
        raise TxInvalid("BadSignature", "malformed public key")
    if len(tx.signature) != SIGNATURE_LEN:
        raise TxInvalid("BadSignature", "malformed signature")
    if not 0 <= tx.nonce <= U64_MAX or not 0 <= tx.gas_limit <= U64_MAX or not 0 <= tx.gas_price <= U64_MAX:
        raise ArithmeticOverflow("field exceeds u64")
    if not 0 <= tx.value <= U128_MAX:
        raise ArithmeticOverflow("value exceeds u128")
    tx.call.check_shape()


def check_transaction_signature(tx: Transaction) -> None:
    _check_structure(tx)
    if derive_address(tx.sender_pubkey) != tx.sender:
        raise TxInvalid("BadSignature", "sender does not match public key")
    if not verify(tx.sender_pubkey, tx.unsigned_bytes(), tx.signature):
        raise TxInvalid("BadSignature")


def apply_transaction(
    state: LedgerState,
    tx: Transaction,
    genesis: Genesis,
    proposer: bytes,
    block_number: int = 0,
) -> Receipt:
    """Apply one transaction in place, returning its receipt.

    Raises TxInvalid for structural rejections (the tx must not be included
    in a block); contract reverts produce a Reverted receipt with the fee
    charged and the nonce bumped.
    """
    schedule = genesis.schedule
    check_transaction_signature(tx)
    fn = tx.call.function

    if fn == CallFn.FAUCET_MINT:
        return _apply_mint(state, tx, genesis, block_number)

    if tx.to != genesis.contract_address:
        raise TxInvalid("BadTarget", "transaction target is not the rating contract")

    sender = state.account(tx.sender)
    if tx.nonce != sender.nonce:
        raise TxInvalid("BadNonce", f"expected {sender.nonce}, got {tx.nonce}")
    intrinsic = schedule.intrinsic_gas(fn)
    if tx.gas_limit < intrinsic:
        raise TxInvalid("GasLimitTooLow", f"need {intrinsic}")
    max_cost = compute_fee(tx.gas_limit, tx.gas_price) + tx.value
    if sender.balance < max_cost:
        raise TxInvalid("InsufficientBalance", f"need {max_cost}, have {sender.balance}")

    fee = compute_fee(intrinsic, tx.gas_price)
    sender.balance -= fee
    state.account(proposer).balance += fee
    sender.nonce += 1

    scratch = copy.deepcopy(state.contract)
    try:
        if fn == CallFn.GIVE_RIGHT_TO_RATE:
            rc.give_right_to_rate(scratch, tx.sender, tx.call.rater)
        elif fn == CallFn.SET_RATE:
            rc.set_rate(scratch, tx.sender, tx.call.product, tx.call.value, genesis.mode)
        elif fn == CallFn.GET_RATE:
            rc.get_rate(scratch, tx.call.product)
        elif fn == CallFn.CREATE_PRODUCT:
            rc.create_product(scratch, tx.sender, tx.call.product, tx.call.name)
    except ContractRevert as rev:
        return Receipt(
            tx_hash=tx.tx_hash,
            block_number=block_number,
            status="Reverted",
            reason=rev.reason,
            gas_used=intrinsic,
            fee_wei=fee,
            sender=tx.sender,
            function=fn,
        )

    state.contract = scratch
    if tx.value:
        sender.balance -= tx.value
        state.account(tx.to).balance += tx.value
    return Receipt(
        tx_hash=tx.tx_hash,
        block_number=block_number,
        status="Success",
        reason="",
        gas_used=intrinsic,
        fee_wei=fee,
        sender=tx.sender,
        function=fn,
    )


def _apply_mint(state: LedgerState, tx: Transaction, genesis: Genesis, block_number: int) -> Receipt:
    if not genesis.faucet_enabled:
        raise TxInvalid("FaucetDisabled")
    if tx.sender not in genesis.authorities:
        raise TxInvalid("UnauthorizedMint", "faucet mints must come from an authority")
    sender = state.account(tx.sender)
    if tx.nonce != sender.nonce:
        raise TxInvalid("BadNonce", f"expected {sender.nonce}, got {tx.nonce}")
    sender.nonce += 1
    state.account(tx.to).balance += tx.value
    state.faucet_minted += tx.value
    return Receipt(
        tx_hash=tx.tx_hash,
        block_number=block_number,
        status="Success",
        reason="",
        gas_used=0,
        fee_wei=0,
        sender=tx.sender,
        function=CallFn.FAUCET_MINT,
    )


def expected_proposer(height: int, authorities: tuple[bytes, ...]) -> bytes:
    if not authorities:
        raise ValueError("empty authority set")
    return authorities[height % len(authorities)]


def validate_block(
    head_number: int,
    head_hash: bytes,
    head_timestamp: int,
    candidate: Block,
    genesis: Genesis,
    state: LedgerState,
) -> tuple[LedgerState, list[Receipt]]:
    """Validate a candidate extending (head_number, head_hash).

    Returns the post-state (a fresh copy; `state` is untouched) and the
    receipts. Raises BlockInvalid with a named violation on any failure.
    """
    if candidate.parent_hash != head_hash:
        raise BlockInvalid("ParentMismatch", f"at height {candidate.number}")
    if candidate.number != head_number + 1:
        raise BlockInvalid("BadNumber", f"expected {head_number + 1}, got {candidate.number}")
    if candidate.timestamp < head_timestamp:
        raise BlockInvalid("BadTimestamp", "timestamp regressed")
    if candidate.proposer not in genesis.authorities:
        raise BlockInvalid("UnauthorizedProposer", candidate.proposer.hex())
    if derive_address(candidate.proposer_pubkey) != candidate.proposer:
        raise BlockInvalid("BadProposerSignature", "proposer key mismatch")
    in_turn = expected_proposer(candidate.number, genesis.authorities) == candidate.proposer
    if candidate.out_of_turn == in_turn:
        raise BlockInvalid("BadTurnFlag", "out_of_turn flag inconsistent with rotation")
    if candidate.gas_limit != genesis.gas_limit:
        raise BlockInvalid("BadGasLimit")
    if candidate.gas_used > candidate.gas_limit:
        raise BlockInvalid("GasLimitExceeded")
    if candidate.compute_hash() != candidate.block_hash:
        raise BlockInvalid("HashMismatch")
    if not verify(candidate.proposer_pubkey, candidate.block_hash, candidate.proposer_signature):
        raise BlockInvalid("BadProposerSignature")
    if not candidate.transactions:
        raise BlockInvalid("EmptyBlock", "empty blocks are disabled")

    new_state = copy.deepcopy(state)
    receipts = []
    gas_total = 0
    for tx in candidate.transactions:
        try:
            receipt = apply_transaction(new_state, tx, genesis, candidate.proposer, candidate.number)
        except TxInvalid as exc:
            raise BlockInvalid("TxInvalid", f"{exc.code} at tx {tx.tx_hash.hex()[:16]}") from exc
        receipts.append(receipt)
        gas_total += receipt.gas_used
    if gas_total != candidate.gas_used:
        raise BlockInvalid("GasMismatch", f"declared {candidate.gas_used}, actual {gas_total}")
    return new_state, receipts


def replay_chain(genesis: Genesis, blocks: list[Block]) -> tuple[LedgerState, list[Receipt]]:
    """Replay a block list from genesis; deterministic.

    The first invalid block aborts with BlockInvalid carrying its height.
    """
    state = genesis.initial_state()
    head_number = 0
    head_hash = genesis.genesis_hash()
    head_timestamp = 0
    receipts: list[Receipt] = []
    for block in blocks:
        try:
            state, blk_receipts = validate_block(
                head_number, head_hash, head_timestamp, block, genesis, state
            )
        except BlockInvalid as exc:
            raise BlockInvalid(exc.code, f"height {block.number}: {exc}") from exc
        receipts.extend(blk_receipts)
        head_number, head_hash, head_timestamp = block.number, block.block_hash, block.timestamp
    return state, receipts


def check_conservation(state: LedgerState, genesis: Genesis) -> None:
    """Sum of balances must equal genesis total plus faucet mints, exactly."""
    total = state.total_balance()
    expected = genesis.genesis_total() + state.faucet_minted
    if total != expected:
        raise AssertionError(f"conservation violated: balances {total} != {expected}")
