"""Deterministic multi-node simulation harness.

Runs V validator nodes plus client traffic over a simulated message
network with configurable latency, drops, and a single partition cut.
Logical time only: the whole run is a pure function of the config, so two
runs with the same seed produce byte-identical reports.
"""

from __future__ import annotations

import heapq
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional

from .contract import AveragingMode
from .crypto import KeyPair, digest_to_hex, generate_keypair, hash32
from .ledger import (
    Block,
    CallFn,
    CallPayload,
    Genesis,
    Transaction,
    check_conservation,
)
from .nodecore import Node

TICK_SECONDS = 1.0
SYNC_INTERVAL_TICKS = 2
FIFO_EPSILON = 1e-6

ADVERSARY_BEHAVIORS = ("NonAuthorityProposer", "DoubleRateSpammer", "TamperedBlockRelay")


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionSpec:
    start: float
    duration: float
    group_a: tuple[int, ...]  # node indices on one side of the cut


@dataclass(frozen=True)
class WorkloadSpec:
    raters: int = 10
    products: int = 5
    transactions: int = 50   # SetRate count
    start: float = 1.0
    rate: float = 50.0       # transactions per logical second
    pregrant: bool = False   # grant rights in genesis instead of via txs


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    validators: int = 4
    latency_min_ms: float = 20.0
    latency_max_ms: float = 100.0
    drop_rate: float = 0.0
    partitions: tuple[PartitionSpec, ...] = ()
    workload: WorkloadSpec = WorkloadSpec()
    adversary: Optional[str] = None
    adversary_count: int = 10     # blocks/txs the adversary emits
    convergence_window: float = 60.0
    event_budget: int = 2_000_000
    mode: str = "corrected"

    def __post_init__(self):
        if self.validators < 1:
            raise SimConfigError("need at least one validator")
        if self.adversary is not None and self.adversary not in ADVERSARY_BEHAVIORS:
            raise SimConfigError(f"unknown adversary behavior {self.adversary!r}")
        spans = sorted((p.start, p.start + p.duration) for p in self.partitions)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            if s2 < e1:
                raise SimConfigError("overlapping partitions are not supported")


def config_from_json(obj: dict[str, Any]) -> SimConfig:
    wl = obj.get("workload", {})
    return SimConfig(
        seed=int(obj.get("seed", 0)),
        validators=int(obj.get("validators", 4)),
        latency_min_ms=float(obj.get("latency_min_ms", 20.0)),
        latency_max_ms=float(obj.get("latency_max_ms", 100.0)),
        drop_rate=float(obj.get("drop_rate", 0.0)),
        partitions=tuple(
            PartitionSpec(float(p["start"]), float(p["duration"]), tuple(p["group_a"]))
            for p in obj.get("partitions", [])
        ),
        workload=WorkloadSpec(
            raters=int(wl.get("raters", 10)),
            products=int(wl.get("products", 5)),
            transactions=int(wl.get("transactions", 50)),
            start=float(wl.get("start", 1.0)),
            rate=float(wl.get("rate", 50.0)),
            pregrant=bool(wl.get("pregrant", False)),
        ),
        adversary=obj.get("adversary"),
        adversary_count=int(obj.get("adversary_count", 10)),
        convergence_window=float(obj.get("convergence_window", 60.0)),
        event_budget=int(obj.get("event_budget", 2_000_000)),
        mode=str(obj.get("mode", "corrected")),
    )


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_json(json.load(fh))


def _keypair(tag: str, seed: int, index: int) -> KeyPair:
    return generate_keypair(hash32(f"{tag}:{seed}:{index}".encode()))


def build_sim_genesis(config: SimConfig) -> tuple[Genesis, list[KeyPair], KeyPair, list[KeyPair], list[bytes]]:
    """Deterministic genesis: validators, owner, funded raters, products."""
    validators = [_keypair("validator", config.seed, i) for i in range(config.validators)]
    owner = _keypair("owner", config.seed, 0)
    raters = [_keypair("rater", config.seed, i) for i in range(config.workload.raters)]
    products = [hash32(f"product:{config.seed}:{i}".encode())[-20:] for i in range(config.workload.products)]
    allocations = [(owner.address, 10**24)]
    allocations += [(kp.address, 10**21) for kp in raters]
    genesis = Genesis(
        authorities=tuple(v.address for v in validators),
        owner=owner.address,
        contract_address=hash32(f"contract:{config.seed}".encode())[-20:],
        allocations=tuple(allocations),
        products=tuple((p, f"Product {i}") for i, p in enumerate(products)),
        raters=tuple(kp.address for kp in raters) if config.workload.pregrant else (),
        mode=AveragingMode(config.mode),
        faucet_enabled=False,
    )
    return genesis, validators, owner, raters, products


@dataclass(frozen=True)
class SimMessage:
    kind: str                # NewTransaction | NewBlock | ChainRequest | ChainResponse
    frm: int                 # node index; -1 for external clients
    to: int
    payload: Any
    deliver_at: float


@dataclass
class SimReport:
    data: dict[str, Any] = field(default_factory=dict)

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":")).encode()


class Simulation:
    """Discrete-event simulation of a PoA rating network."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.genesis, self.validator_keys, self.owner_key, self.rater_keys, self.products = (
            build_sim_genesis(config)
        )
        self.nodes = [
            Node(self.genesis, node_id=f"v{i}", keypair=kp)
            for i, kp in enumerate(self.validator_keys)
        ]
        self.partitions = list(config.partitions)
        self.adversary = config.adversary
        self._events: list[tuple[float, int, str, Any]] = []
        self._seq = 0
        self._last_delivery: dict[tuple[int, int], float] = {}
        self.events_processed = 0
        self.timed_out = False
        self.convergence_time: Optional[float] = None
        self.adversary_node: Optional[Node] = None
        self.adversary_key: Optional[KeyPair] = None
        self.tampered_relayed = 0

    # -- public scenario knobs ----------------------------------------------

    def add_partition(self, start: float, duration: float, group_a: tuple[int, ...]) -> None:
        spans = [(p.start, p.start + p.duration) for p in self.partitions]
        for s, e in spans:
            if start < e and s < start + duration:
                raise SimConfigError("overlapping partitions are not supported")
        self.partitions.append(PartitionSpec(start, duration, group_a))

    def set_adversary(self, behavior: str) -> None:
        if behavior not in ADVERSARY_BEHAVIORS:
            raise SimConfigError(f"unknown adversary behavior {behavior!r}")
        self.adversary = behavior

    # -- event plumbing ------------------------------------------------------

    def _schedule(self, t: float, kind: str, data: Any) -> None:
        heapq.heappush(self._events, (t, self._seq, kind, data))
        self._seq += 1

    def _partitioned(self, t: float, a: int, b: int) -> bool:
        for p in self.partitions:
            if p.start <= t < p.start + p.duration:
                side_a = a in p.group_a
                side_b = b in p.group_a
                if side_a != side_b:
                    return True
        return False

    def _send(self, t: float, frm: int, to: int, kind: str, payload: Any) -> None:
        if frm >= 0 and self._partitioned(t, frm, to):
            return
        if self.config.drop_rate > 0 and self.rng.random() < self.config.drop_rate:
            return
        lat = self.rng.uniform(self.config.latency_min_ms, self.config.latency_max_ms) / 1000.0
        deliver_at = t + lat
        key = (frm, to)
        last = self._last_delivery.get(key, 0.0)
        if deliver_at <= last:
            deliver_at = last + FIFO_EPSILON  # FIFO per link
        self._last_delivery[key] = deliver_at
        self._schedule(deliver_at, "deliver", SimMessage(kind, frm, to, payload, deliver_at))

    def _broadcast(self, t: float, frm: int, kind: str, payload: Any, exclude: int = -2) -> None:
        targets = list(range(len(self.nodes)))
        if self.adversary == "TamperedBlockRelay":
            targets.append(len(self.nodes))  # relay adversary listens too
        for to in targets:
            if to != frm and to != exclude:
                self._send(t, frm, to, kind, payload)

    # -- workload ------------------------------------------------------------

    def _build_workload(self) -> None:
        wl = self.config.workload
        contract = self.genesis.contract_address
        gas_price = 1

        def make_tx(kp: KeyPair, nonce: int, call: CallPayload) -> Transaction:
            return Transaction(
                nonce=nonce,
                sender=kp.address,
                sender_pubkey=kp.public_key,
                to=contract,
                value=0,
                gas_limit=self.genesis.gas_limit,
                gas_price=gas_price,
                call=call,
            ).signed(kp.secret_key)

        owner_nonce = 0
        if not wl.pregrant:
            for kp in self.rater_keys:
                tx = make_tx(
                    self.owner_key,
                    owner_nonce,
                    CallPayload(CallFn.GIVE_RIGHT_TO_RATE, rater=kp.address),
                )
                owner_nonce += 1
                self._schedule(0.0, "tx_submit", (self.rng.randrange(len(self.nodes)), tx))

        pairs = [(r, p) for r in range(len(self.rater_keys)) for p in range(len(self.products))]
        if wl.transactions > len(pairs):
            raise SimConfigError(
                f"workload needs {wl.transactions} distinct (rater, product) pairs, "
                f"only {len(pairs)} available"
            )
        self.rng.shuffle(pairs)
        chosen = pairs[: wl.transactions]
        rater_nonce = Counter()
        for i, (r, p) in enumerate(chosen):
            kp = self.rater_keys[r]
            tx = make_tx(
                kp,
                rater_nonce[r],
                CallPayload(CallFn.SET_RATE, product=self.products[p], value=self.rng.randint(0, 100)),
            )
            rater_nonce[r] += 1
            t = wl.start + i / wl.rate
            self._schedule(t, "tx_submit", (self.rng.randrange(len(self.nodes)), tx))
        self._workload_end = wl.start + wl.transactions / wl.rate

        if self.adversary == "DoubleRateSpammer":
            kp = _keypair("spammer", self.config.seed, 0)
            # the spammer is a funded, rightful rater abusing replays
            spam_product = self.products[0]
            for i in range(self.config.adversary_count):
                tx = make_tx(kp, i, CallPayload(CallFn.SET_RATE, product=spam_product, value=77))
                t = wl.start + i * 0.05
                self._schedule(t, "tx_submit", (self.rng.randrange(len(self.nodes)), tx))
            self._workload_end = max(self._workload_end, wl.start + self.config.adversary_count * 0.05)

    def _spammer_genesis_patch(self) -> None:
        # DoubleRateSpammer needs funds and a rating right at genesis
        if self.config.adversary != "DoubleRateSpammer" and self.adversary != "DoubleRateSpammer":
            return
        kp = _keypair("spammer", self.config.seed, 0)
        from dataclasses import replace

        self.genesis = replace(
            self.genesis,
            allocations=self.genesis.allocations + ((kp.address, 10**21),),
            raters=self.genesis.raters + (kp.address,),
        )
        for node in self.nodes:
            node.__init__(self.genesis, node_id=node.node_id, keypair=node.keypair)

    # -- node behavior --------------------------------------------------------

    def _on_tick(self, data: tuple[int, int]) -> None:
        idx, tick_no = data
        t = tick_no * TICK_SECONDS
        node = self.nodes[idx]
        height = node.head_number + 1
        n = len(self.genesis.authorities)
        rank = (idx - height) % n  # 0 = in turn for this height
        deadline = node.head_timestamp + self.genesis.slot_deadline_seconds
        if node.has_executable_work() and (rank == 0 or t >= deadline + rank):
            block = node.try_seal(int(t))
            if block is not None:
                self._broadcast(t, idx, "NewBlock", block)
        if tick_no % SYNC_INTERVAL_TICKS == 0 and len(self.nodes) > 1:
            peer = self.rng.randrange(len(self.nodes) - 1)
            if peer >= idx:
                peer += 1
            self._send(t, idx, peer, "ChainRequest", (node.head_number, node.head_hash))

    def _on_deliver(self, msg: SimMessage) -> None:
        t = msg.deliver_at
        if msg.to == len(self.nodes):
            self._adversary_receive(msg)
            return
        node = self.nodes[msg.to]
        if msg.kind == "NewTransaction":
            is_new, _err = node.submit_transaction(msg.payload)
            if is_new:
                self._broadcast(t, msg.to, "NewTransaction", msg.payload, exclude=msg.frm)
        elif msg.kind == "NewBlock":
            status = node.receive_block(msg.payload, int(t))
            if status in ("extended", "adopted"):
                self._broadcast(t, msg.to, "NewBlock", msg.payload, exclude=msg.frm)
            elif status == "need_sync" and msg.frm >= 0:
                self._send(t, msg.to, msg.frm, "ChainRequest", (node.head_number, node.head_hash))
        elif msg.kind == "ChainRequest":
            req_number, req_hash = msg.payload
            if node.head_number > req_number or (
                node.head_number == req_number and node.head_hash != req_hash
            ):
                self._send(t, msg.to, msg.frm, "ChainResponse", list(node.chain))
        elif msg.kind == "ChainResponse":
            node.receive_chain(msg.payload, int(t))

    def _on_tx_submit(self, data: tuple[int, Transaction], t: float) -> None:
        idx, tx = data
        node = self.nodes[idx]
        is_new, _err = node.submit_transaction(tx)
        if is_new:
            self._broadcast(t, idx, "NewTransaction", tx)

    # -- adversary -------------------------------------------------------------

    def _setup_adversary(self, end_time: float) -> None:
        if self.adversary == "NonAuthorityProposer":
            self.adversary_key = _keypair("adversary", self.config.seed, 0)
            self.adversary_node = Node(self.genesis, node_id="adv")
            for i in range(self.config.adversary_count):
                self._schedule(self.config.workload.start + i * 1.0, "adv_block", i)
        elif self.adversary == "TamperedBlockRelay":
            self.adversary_node = Node(self.genesis, node_id="adv")

    def _adversary_receive(self, msg: SimMessage) -> None:
        # the tampered relay listens for blocks and re-broadcasts mutated copies
        if self.adversary != "TamperedBlockRelay" or msg.kind != "NewBlock":
            return
        from dataclasses import replace

        block: Block = msg.payload
        tampered = replace(block, gas_used=block.gas_used + 1)  # keeps the stale hash
        self.tampered_relayed += 1
        for to in range(len(self.nodes)):
            self._send(msg.deliver_at, len(self.nodes), to, "NewBlock", tampered)

    def _emit_adversary_block(self, i: int, t: float) -> None:
        kp = self.adversary_key
        assert kp is not None
        observer = self.nodes[0]  # adversary forges on top of a real head
        junk_tx = Transaction(
            nonce=i,
            sender=kp.address,
            sender_pubkey=kp.public_key,
            to=self.genesis.contract_address,
            value=0,
            gas_limit=self.genesis.gas_limit,
            gas_price=1,
            call=CallPayload(CallFn.GET_RATE, product=self.products[0]),
        ).signed(kp.secret_key)
        block = Block(
            number=observer.head_number + 1,
            parent_hash=observer.head_hash,
            timestamp=int(t),
            proposer=kp.address,
            proposer_pubkey=kp.public_key,
            out_of_turn=False,
            gas_limit=self.genesis.gas_limit,
            gas_used=self.genesis.schedule.get_rate,
            transactions=(junk_tx,),
        ).sealed(kp.secret_key)
        for to in range(len(self.nodes)):
            self._send(t, -1, to, "NewBlock", block)

    # -- run --------------------------------------------------------------------

    def run(self) -> SimReport:
        self._spammer_genesis_patch()
        self._build_workload()
        end_time = self._workload_end + self.config.convergence_window
        for idx in range(len(self.nodes)):
            for tick_no in range(1, int(end_time) + 1):
                self._schedule(tick_no * TICK_SECONDS, "tick", (idx, tick_no))
        self._setup_adversary(end_time)

        converged_since: Optional[float] = None
        while self._events:
            if self.events_processed >= self.config.event_budget:
                self.timed_out = True
                break
            t, _seq, kind, data = heapq.heappop(self._events)
            self.events_processed += 1
            heads_before = [n.head_hash for n in self.nodes]
            if kind == "tick":
                self._on_tick(data)
            elif kind == "deliver":
                self._on_deliver(data)
            elif kind == "tx_submit":
                self._on_tx_submit(data, t)
            elif kind == "adv_block":
                self._emit_adversary_block(data, t)
            heads_after = [n.head_hash for n in self.nodes]
            if heads_after != heads_before:
                if len(set(heads_after)) == 1:
                    converged_since = t
                else:
                    converged_since = None
        self.convergence_time = converged_since
        return self._report()

    def _report(self) -> SimReport:
        nodes: dict[str, Any] = {}
        conservation_ok = True
        for node in self.nodes:
            try:
                check_conservation(node.state, self.genesis)
                ok = True
            except AssertionError:
                ok = False
                conservation_ok = False
            receipt_counts = Counter()
            for r in node.receipts.values():
                key = r.status if r.status == "Success" else f"Reverted:{r.reason}"
                receipt_counts[key] += 1
            nodes[node.node_id] = {
                "head_hash": digest_to_hex(node.head_hash) if node.chain else digest_to_hex(self.genesis.genesis_hash()),
                "height": node.head_number,
                "state_digest": digest_to_hex(node.state.digest()),
                "receipts": dict(sorted(receipt_counts.items())),
                "rejections": dict(sorted(node.rejections.items())),
                "reorgs": node.reorgs,
                "mempool_size": len(node.mempool),
                "conservation_ok": ok,
                "sum_balances": str(node.state.total_balance()),
                "faucet_minted": str(node.state.faucet_minted),
            }
        heads = {n.head_hash for n in self.nodes}
        digests = {n.state.digest() for n in self.nodes}
        report = SimReport(
            data={
                "nodes": nodes,
                "converged": len(heads) == 1 and len(digests) == 1,
                "convergence_time": self.convergence_time,
                "fork_count": sum(n.reorgs for n in self.nodes),
                "events_processed": self.events_processed,
                "timed_out": self.timed_out,
                "conservation_ok": conservation_ok,
                "genesis_total": str(self.genesis.genesis_total()),
                "tampered_relayed": self.tampered_relayed,
            }
        )
        return report


def run_simulation(config: SimConfig) -> SimReport:
    return Simulation(config).run()
