"""Round-robin proof-of-authority: sealing, acceptance timing, fork choice.

The in-turn proposer for height h is authorities[h mod N]. An out-of-turn
authority may seal only once the slot deadline (head timestamp +
slot_deadline_seconds) has passed; its block carries the out_of_turn flag.
Fork choice is a strict total order: longer chain, then fewer out-of-turn
blocks, then lexicographically lower head hash.
"""

from __future__ import annotations

from dataclasses import dataclass

from .crypto import KeyPair
from .ledger import (
    Block,
    BlockInvalid,
    Genesis,
    LedgerState,
    Receipt,
    Transaction,
    TxInvalid,
    apply_transaction,
    expected_proposer,
)

import copy


def slot_deadline(head_timestamp: int, genesis: Genesis) -> int:
    """Logical time after which out-of-turn proposers may seal the next block."""
    return head_timestamp + genesis.slot_deadline_seconds


def may_seal(proposer: bytes, height: int, now: int, head_timestamp: int, genesis: Genesis) -> bool:
    if proposer not in genesis.authorities:
        return False
    if expected_proposer(height, genesis.authorities) == proposer:
        return True
    return now >= slot_deadline(head_timestamp, genesis)


@dataclass(frozen=True)
class SealResult:
    block: Block
    state: LedgerState
    receipts: list[Receipt]
    included: list[Transaction]
    dropped: list[tuple[Transaction, str]]  # structurally invalid, with reason


def seal_block(
    pending: list[Transaction],
    head_number: int,
    head_hash: bytes,
    head_timestamp: int,
    state: LedgerState,
    keypair: KeyPair,
    now: int,
    genesis: Genesis,
) -> SealResult | None:
    """Seal the next block from the pending pool, or None if nothing fits.

    Transactions are packed in arrival order until the gas limit would be
    exceeded; nonce-gapped transactions stay pending for a later block,
    permanently invalid ones are reported as dropped. Empty blocks are
    never sealed.
    """
    proposer = keypair.address
    if proposer not in genesis.authorities:
        raise ValueError("refusing to seal: key is not an authority")
    height = head_number + 1
    in_turn = expected_proposer(height, genesis.authorities) == proposer
    if not in_turn and now < slot_deadline(head_timestamp, genesis):
        return None
    timestamp = max(int(now), head_timestamp)

    scratch = copy.deepcopy(state)
    included: list[Transaction] = []
    receipts: list[Receipt] = []
    dropped: list[tuple[Transaction, str]] = []
    gas_used = 0
    remaining = list(pending)
    progressed = True
    while progressed and remaining:
        # repeat passes so nonce-gapped txs unblocked within this block get in
        progressed = False
        deferred: list[Transaction] = []
        for tx in remaining:
            intrinsic = genesis.schedule.intrinsic_gas(tx.call.function)
            if gas_used + intrinsic > genesis.gas_limit:
                continue  # stays pending for the next block
            before = copy.deepcopy(scratch)
            try:
                receipt = apply_transaction(scratch, tx, genesis, proposer, height)
            except TxInvalid as exc:
                scratch = before
                if exc.code == "BadNonce":
                    deferred.append(tx)  # may become valid once earlier txs commit
                    continue
                dropped.append((tx, exc.code))
                continue
            included.append(tx)
            receipts.append(receipt)
            gas_used += receipt.gas_used
            progressed = True
        remaining = deferred

    if not included:
        return None
    block = Block(
        number=height,
        parent_hash=head_hash,
        timestamp=timestamp,
        proposer=proposer,
        proposer_pubkey=keypair.public_key,
        out_of_turn=not in_turn,
        gas_limit=genesis.gas_limit,
        gas_used=gas_used,
        transactions=tuple(included),
    ).sealed(keypair.secret_key)
    return SealResult(block=block, state=scratch, receipts=receipts, included=included, dropped=dropped)


def check_acceptance_timing(candidate: Block, head_timestamp: int, genesis: Genesis) -> None:
    """Out-of-turn blocks are only acceptable at or after the slot deadline."""
    if candidate.out_of_turn and candidate.timestamp < slot_deadline(head_timestamp, genesis):
        raise BlockInvalid("PrematureOutOfTurn")


def chain_weight(blocks: list[Block]) -> tuple[int, int, bytes]:
    """Sort key under which the better of two chains compares greater."""
    length = len(blocks)
    out_of_turn = sum(1 for b in blocks if b.out_of_turn)
    head_hash = blocks[-1].block_hash if blocks else b"\xff" * 32
    # fewer out-of-turn blocks and lower head hash win, so invert both
    return (length, -out_of_turn, bytes(255 - x for x in head_hash))


def fork_choice(chain_a: list[Block], chain_b: list[Block]) -> list[Block]:
    """Deterministic total order over competing valid chains from one genesis."""
    return chain_a if chain_weight(chain_a) >= chain_weight(chain_b) else chain_b


def finality_depth(genesis: Genesis) -> int:
    n = len(genesis.authorities)
    return -(-n // 2) + 1  # ceil(N/2) + 1
