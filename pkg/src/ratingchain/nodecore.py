"""Transport-agnostic node state machine.

One Node owns a chain, the replayed ledger state, a mempool, and a receipt
index. The network simulator drives it with logical time and in-memory
messages; the HTTP service drives the same code with wall-clock time and
socket gossip. All methods are synchronous; callers serialize access.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from . import consensus
from .crypto import KeyPair
from .ledger import (
    Block,
    BlockInvalid,
    Genesis,
    LedgerState,
    Receipt,
    Transaction,
    TxInvalid,
    check_transaction_signature,
    validate_block,
)


def validate_chain(genesis: Genesis, blocks: list[Block]) -> tuple[LedgerState, list[Receipt]]:
    """Full replay plus out-of-turn timing checks; raises BlockInvalid."""
    state = genesis.initial_state()
    head_number, head_hash, head_timestamp = 0, genesis.genesis_hash(), 0
    receipts: list[Receipt] = []
    for block in blocks:
        consensus.check_acceptance_timing(block, head_timestamp, genesis)
        state, blk_receipts = validate_block(
            head_number, head_hash, head_timestamp, block, genesis, state
        )
        receipts.extend(blk_receipts)
        head_number, head_hash, head_timestamp = block.number, block.block_hash, block.timestamp
    return state, receipts


@dataclass
class Node:
    genesis: Genesis
    node_id: str = "node"
    keypair: KeyPair | None = None  # observers carry no key

    chain: list[Block] = field(default_factory=list)
    state: LedgerState = None  # type: ignore[assignment]
    receipts: dict[bytes, Receipt] = field(default_factory=dict)
    mempool: dict[bytes, Transaction] = field(default_factory=dict)
    rejections: Counter = field(default_factory=Counter)
    reorgs: int = 0

    def __post_init__(self):
        self.state = self.genesis.initial_state()
        self._genesis_hash = self.genesis.genesis_hash()
        if self.keypair is not None and self.keypair.address not in self.genesis.authorities:
            raise ValueError("validator key is not in the genesis authority set")

    # -- chain accessors ---------------------------------------------------

    @property
    def head_number(self) -> int:
        return self.chain[-1].number if self.chain else 0

    @property
    def head_hash(self) -> bytes:
        return self.chain[-1].block_hash if self.chain else self._genesis_hash

    @property
    def head_timestamp(self) -> int:
        return self.chain[-1].timestamp if self.chain else 0

    def block_by_number(self, number: int) -> Block | None:
        if 1 <= number <= len(self.chain):
            return self.chain[number - 1]
        return None

    def tx_by_hash(self, tx_hash: bytes) -> tuple[Transaction, int] | None:
        for block in self.chain:
            for tx in block.transactions:
                if tx.tx_hash == tx_hash:
                    return tx, block.number
        return None

    # -- transactions ------------------------------------------------------

    def submit_transaction(self, tx: Transaction) -> tuple[bool, str]:
        """Add to the mempool. Returns (is_new, error); error is "" when queued."""
        if tx.tx_hash in self.mempool or tx.tx_hash in self.receipts:
            return False, ""
        try:
            check_transaction_signature(tx)
        except TxInvalid as exc:
            self.rejections[exc.code] += 1
            return False, exc.code
        acct = self.state.accounts.get(tx.sender)
        if acct is not None and tx.nonce < acct.nonce:
            self.rejections["BadNonce"] += 1
            return False, "BadNonce"
        self.mempool[tx.tx_hash] = tx
        return True, ""

    def _prune_mempool(self) -> None:
        stale = []
        for h, tx in self.mempool.items():
            if h in self.receipts:
                stale.append(h)
                continue
            acct = self.state.accounts.get(tx.sender)
            if acct is not None and tx.nonce < acct.nonce:
                stale.append(h)
        for h in stale:
            del self.mempool[h]

    def has_executable_work(self) -> bool:
        if not self.mempool:
            return False
        for tx in self.mempool.values():
            acct = self.state.accounts.get(tx.sender)
            nonce = acct.nonce if acct else 0
            if tx.nonce == nonce:
                return True
        return False

    # -- block production --------------------------------------------------

    def try_seal(self, now: int) -> Block | None:
        if self.keypair is None or not self.mempool:
            return None
        result = consensus.seal_block(
            list(self.mempool.values()),
            self.head_number,
            self.head_hash,
            self.head_timestamp,
            self.state,
            self.keypair,
            now,
            self.genesis,
        )
        if result is None:
            return None
        for tx, code in result.dropped:
            self.rejections[code] += 1
            self.mempool.pop(tx.tx_hash, None)
        self._commit(result.block, result.state, result.receipts)
        return result.block

    def _commit(self, block: Block, state: LedgerState, receipts: list[Receipt]) -> None:
        self.chain.append(block)
        self.state = state
        for r in receipts:
            self.receipts[r.tx_hash] = r
        self._prune_mempool()

    # -- block / chain ingestion --------------------------------------------

    def receive_block(self, block: Block, now: int) -> str:
        """Returns "extended", "duplicate", "need_sync", or "rejected:<code>"."""
        # integrity and authority checks precede the duplicate check: a tampered
        # copy of a known block carries the stale hash and must still be counted
        if block.compute_hash() != block.block_hash:
            self.rejections["HashMismatch"] += 1
            return "rejected:HashMismatch"
        if block.proposer not in self.genesis.authorities:
            self.rejections["UnauthorizedProposer"] += 1
            return "rejected:UnauthorizedProposer"
        if any(b.block_hash == block.block_hash for b in self.chain):
            return "duplicate"
        if block.number == self.head_number + 1 and block.parent_hash == self.head_hash:
            try:
                consensus.check_acceptance_timing(block, self.head_timestamp, self.genesis)
                new_state, receipts = validate_block(
                    self.head_number, self.head_hash, self.head_timestamp,
                    block, self.genesis, self.state,
                )
            except BlockInvalid as exc:
                self.rejections[exc.code] += 1
                return f"rejected:{exc.code}"
            self._commit(block, new_state, receipts)
            return "extended"
        if block.number <= self.head_number and block.number >= 1:
            # competing block at a height we already have; try the sibling chain
            alt = self.chain[: block.number - 1] + [block]
            return self._consider_chain(alt, now)
        return "need_sync"

    def receive_chain(self, blocks: list[Block], now: int) -> str:
        """Full-chain sync response; adopt via fork choice if it wins."""
        return self._consider_chain(blocks, now)

    def _consider_chain(self, blocks: list[Block], now: int) -> str:
        if not blocks:
            return "kept"
        if consensus.chain_weight(blocks) <= consensus.chain_weight(self.chain):
            return "kept"  # cannot win fork choice; skip the replay (ties share a head)
        try:
            state, receipts = validate_chain(self.genesis, blocks)
        except BlockInvalid as exc:
            self.rejections[exc.code] += 1
            return f"rejected:{exc.code}"
        winner = consensus.fork_choice(self.chain, blocks)
        if winner is self.chain:
            return "kept"
        dropped = [b for b in self.chain if b.number > len(blocks) or blocks[b.number - 1].block_hash != b.block_hash]
        if self.chain:
            self.reorgs += 1 if dropped else 0
        # re-queue transactions from discarded blocks so they are not lost
        requeue = [tx for b in dropped for tx in b.transactions]
        self.chain = list(blocks)
        self.state = state
        self.receipts = {r.tx_hash: r for r in receipts}
        for tx in requeue:
            if tx.tx_hash not in self.receipts:
                self.mempool.setdefault(tx.tx_hash, tx)
        self._prune_mempool()
        return "adopted"
