"""Runnable node: HTTP JSON API, peer gossip, append-only persistence.

One writer (the runtime, guarded by a lock) owns the node state; API
handlers take the same lock for consistent reads. Gossip relays
transactions and blocks to peers and range-syncs when behind, reusing the
simulator's message kinds over HTTP.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import httpx
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import consensus
from .blocklog import BlockLog, BlockLogCorrupt
from .crypto import (
    CryptoError,
    KeyPair,
    address_from_hex,
    address_to_hex,
    digest_from_hex,
    digest_to_hex,
)
from .ledger import CallFn, CallPayload, Genesis, Transaction, expected_proposer
from .nodecore import Node, validate_chain
from .wire import (
    WireError,
    block_to_json,
    load_genesis,
    tx_from_json,
    tx_to_json,
)

logger = logging.getLogger(__name__)

FAUCET_WINDOW_BLOCKS = 10


@dataclass
class NodeConfig:
    genesis_path: str
    data_dir: str
    host: str = "127.0.0.1"
    port: int = 7545
    validator_key: KeyPair | None = None
    owner_key: KeyPair | None = None  # demo mode: node can issue grants
    peers: list[str] = field(default_factory=list)
    faucet_enabled: bool = True
    faucet_grant_wei: int = 10**18
    seal_interval: float = 0.5
    sync_interval: float = 2.0


class NodeRuntime:
    """Owns the node state machine, the block log, and the gossip threads."""

    def __init__(self, config: NodeConfig):
        self.config = config
        self.genesis: Genesis = load_genesis(config.genesis_path)
        self.node = Node(self.genesis, node_id=f"{config.host}:{config.port}", keypair=config.validator_key)
        self.lock = threading.RLock()
        self.log = BlockLog(config.data_dir)
        self._recover()
        self.outbox: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._faucet_last_grant: dict[bytes, int] = {}
        self._pending_local_nonces: dict[bytes, int] = {}

    # -- persistence ----------------------------------------------------------

    def _recover(self) -> None:
        try:
            blocks = self.log.load()
        except BlockLogCorrupt:
            raise
        if blocks:
            state, receipts = validate_chain(self.genesis, blocks)
            self.node.chain = blocks
            self.node.state = state
            self.node.receipts = {r.tx_hash: r for r in receipts}
            logger.info("recovered chain head %d from %s", blocks[-1].number, self.log.path)
        self.log.open_append()

    def _persist_new_blocks(self, previous_height: int) -> None:
        for block in self.node.chain[previous_height:]:
            self.log.append(block)

    def _rewrite_log(self) -> None:
        self.log.close()
        tmp = self.log.path.with_suffix(".tmp")
        import json as _json

        with open(tmp, "w", encoding="utf-8") as fh:
            for block in self.node.chain:
                fh.write(_json.dumps(block_to_json(block), separators=(",", ":")) + "\n")
        tmp.replace(self.log.path)
        self.log.open_append()

    # -- mutations --------------------------------------------------------------

    def submit_transaction(self, tx: Transaction) -> tuple[bool, str]:
        with self.lock:
            is_new, err = self.node.submit_transaction(tx)
        if is_new:
            self.outbox.put(("tx", tx))
        return is_new, err

    def _next_local_nonce(self, sender: bytes) -> int:
        # account nonce plus this sender's queued mempool txs
        acct = self.node.state.accounts.get(sender)
        base = acct.nonce if acct else 0
        pending = sum(1 for t in self.node.mempool.values() if t.sender == sender)
        return base + pending

    def faucet(self, recipient: bytes) -> Transaction:
        if not (self.config.faucet_enabled and self.genesis.faucet_enabled):
            raise HTTPException(status_code=403, detail="faucet disabled")
        if self.config.validator_key is None:
            raise HTTPException(status_code=403, detail="this node holds no faucet key")
        with self.lock:
            head = self.node.head_number
            last = self._faucet_last_grant.get(recipient)
            if last is not None and head - last < FAUCET_WINDOW_BLOCKS:
                raise HTTPException(status_code=429, detail="faucet rate limit: 1 grant per 10 blocks")
            kp = self.config.validator_key
            tx = Transaction(
                nonce=self._next_local_nonce(kp.address),
                sender=kp.address,
                sender_pubkey=kp.public_key,
                to=recipient,
                value=self.config.faucet_grant_wei,
                gas_limit=0,
                gas_price=0,
                call=CallPayload(CallFn.FAUCET_MINT),
            ).signed(kp.secret_key)
            is_new, err = self.node.submit_transaction(tx)
            if err:
                raise HTTPException(status_code=500, detail=f"faucet mint rejected: {err}")
            self._faucet_last_grant[recipient] = head
        if is_new:
            self.outbox.put(("tx", tx))
        return tx

    def demo_grant(self, rater: bytes) -> Transaction:
        if self.config.owner_key is None:
            raise HTTPException(status_code=403, detail="node holds no owner key (demo mode off)")
        kp = self.config.owner_key
        with self.lock:
            tx = Transaction(
                nonce=self._next_local_nonce(kp.address),
                sender=kp.address,
                sender_pubkey=kp.public_key,
                to=self.genesis.contract_address,
                value=0,
                gas_limit=self.genesis.gas_limit,
                gas_price=self.genesis.gas_price_suggestion,
                call=CallPayload(CallFn.GIVE_RIGHT_TO_RATE, rater=rater),
            ).signed(kp.secret_key)
            is_new, err = self.node.submit_transaction(tx)
            if err:
                raise HTTPException(status_code=400, detail=f"grant rejected: {err}")
        if is_new:
            self.outbox.put(("tx", tx))
        return tx

    def receive_gossip_tx(self, tx: Transaction) -> tuple[bool, str]:
        return self.submit_transaction(tx)

    def receive_gossip_block(self, block) -> str:
        with self.lock:
            prev = self.node.head_number
            status = self.node.receive_block(block, int(time.time()))
            if status == "extended":
                self._persist_new_blocks(prev)
            elif status == "adopted":
                self._rewrite_log()
        if status in ("extended", "adopted"):
            self.outbox.put(("block", block))
        return status

    # -- background loops ----------------------------------------------------------

    def _seal_loop(self) -> None:
        while not self._stop.wait(self.config.seal_interval):
            block = None
            with self.lock:
                prev = self.node.head_number
                block = self.node.try_seal(int(time.time()))
                if block is not None:
                    self._persist_new_blocks(prev)
            if block is not None:
                self.outbox.put(("block", block))

    def _gossip_loop(self) -> None:
        client = httpx.Client(timeout=2.0)
        while not self._stop.is_set():
            try:
                kind, payload = self.outbox.get(timeout=0.2)
            except queue.Empty:
                continue
            for peer in self.config.peers:
                try:
                    if kind == "tx":
                        client.post(f"{peer}/gossip/tx", json=tx_to_json(payload))
                    else:
                        client.post(f"{peer}/gossip/block", json=block_to_json(payload))
                except httpx.HTTPError as exc:
                    logger.warning("gossip to %s failed: %s", peer, exc)
        client.close()

    def _sync_loop(self) -> None:
        client = httpx.Client(timeout=5.0)
        while not self._stop.wait(self.config.sync_interval):
            for peer in self.config.peers:
                try:
                    head = client.get(f"{peer}/chain/head").json()
                except (httpx.HTTPError, ValueError) as exc:
                    logger.debug("sync probe to %s failed: %s", peer, exc)
                    continue
                with self.lock:
                    ours = self.node.head_number
                    our_hash = digest_to_hex(self.node.head_hash)
                if head.get("number", 0) < ours or (
                    head.get("number") == ours and head.get("block_hash") == our_hash
                ):
                    continue
                try:
                    resp = client.get(
                        f"{peer}/blocks", params={"from": 1, "to": head["number"], "full": "true"}
                    )
                    from .wire import block_from_json

                    blocks = [block_from_json(b) for b in resp.json()]
                except (httpx.HTTPError, ValueError, WireError) as exc:
                    logger.warning("range sync from %s failed: %s", peer, exc)
                    continue
                with self.lock:
                    status = self.node.receive_chain(blocks, int(time.time()))
                    if status == "adopted":
                        self._rewrite_log()
        client.close()

    def start_background(self) -> None:
        for target in (self._seal_loop, self._gossip_loop, self._sync_loop):
            th = threading.Thread(target=target, daemon=True)
            th.start()
            self._threads.append(th)

    def stop(self) -> None:
        self._stop.set()
        for th in self._threads:
            th.join(timeout=3.0)
        self.log.close()


def _parse_address(s: str) -> bytes:
    try:
        return address_from_hex(s)
    except CryptoError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _mined_on(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d %H:%M:%S")


def create_app(runtime: NodeRuntime, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="ratingchain node")
    node = runtime.node
    genesis = runtime.genesis

    @app.exception_handler(WireError)
    async def _wire_error(_req: Request, exc: WireError):
        return JSONResponse(status_code=400, content={"violation": str(exc)})

    @app.post("/transactions", status_code=202)
    def post_transaction(body: dict):
        try:
            tx = tx_from_json(body)
        except WireError as exc:
            raise HTTPException(status_code=400, detail={"violation": str(exc)})
        is_new, err = runtime.submit_transaction(tx)
        if err:
            raise HTTPException(status_code=400, detail={"violation": err})
        return {"tx_hash": digest_to_hex(tx.tx_hash), "accepted": True, "new": is_new}

    @app.get("/receipts/{tx_hash}")
    def get_receipt(tx_hash: str):
        try:
            h = digest_from_hex(tx_hash)
        except CryptoError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with runtime.lock:
            receipt = node.receipts.get(h)
            pending = h in node.mempool
        if receipt is None:
            raise HTTPException(status_code=404, detail="pending" if pending else "unknown transaction")
        return {
            "tx_hash": digest_to_hex(receipt.tx_hash),
            "block_number": receipt.block_number,
            "status": receipt.status,
            "reason": receipt.reason,
            "gas_used": receipt.gas_used,
            "fee_wei": str(receipt.fee_wei),
            "from": address_to_hex(receipt.sender),
            "function": receipt.function.value,
        }

    @app.get("/products")
    def get_products():
        with runtime.lock:
            items = list(node.state.contract.products.items())
        return [
            {
                "id": i + 1,
                "address": address_to_hex(addr),
                "name": rec.name,
                "rating": rec.rating,
                "no_raters": rec.no_raters,
            }
            for i, (addr, rec) in enumerate(items)
        ]

    @app.get("/products/{address}/rating")
    def get_rating(address: str):
        addr = _parse_address(address)
        with runtime.lock:
            from .contract import get_rate

            rating, no_raters, found = get_rate(node.state.contract, addr)
        return {"rating": rating, "no_raters": no_raters, "found": found}

    @app.get("/accounts/{address}")
    def get_account(address: str):
        addr = _parse_address(address)
        with runtime.lock:
            acct = node.state.accounts.get(addr)
            rater = node.state.contract.raters.get(addr)
            return {
                "address": address_to_hex(addr),
                "balance_wei": str(acct.balance if acct else 0),
                "nonce": acct.nonce if acct else 0,
                "weight": rater.weight if rater else 0,
                "rated_products": sorted(address_to_hex(p) for p in rater.rated_products)
                if rater
                else [],
            }

    @app.post("/faucet")
    def post_faucet(body: dict):
        addr = _parse_address(str(body.get("address", "")))
        tx = runtime.faucet(addr)
        return {
            "minted_wei": str(tx.value),
            "tx_hash": digest_to_hex(tx.tx_hash),
        }

    @app.post("/demo/grant")
    def post_demo_grant(body: dict):
        addr = _parse_address(str(body.get("address", "")))
        tx = runtime.demo_grant(addr)
        return {"tx_hash": digest_to_hex(tx.tx_hash)}

    @app.get("/blocks")
    def get_blocks(request: Request):
        params = request.query_params
        with runtime.lock:
            head = node.head_number
            lo = int(params.get("from", 1))
            hi = int(params.get("to", head))
            lo = max(lo, 1)
            hi = min(hi, head)
            blocks = [node.chain[i - 1] for i in range(lo, hi + 1)]
            if params.get("full") == "true":
                return [block_to_json(b) for b in blocks]
            return [
                {
                    "number": b.number,
                    "mined_on": _mined_on(b.timestamp),
                    "timestamp": b.timestamp,
                    "gas_used": b.gas_used,
                    "tx_count": len(b.transactions),
                }
                for b in blocks
            ]

    @app.get("/blocks/{number}")
    def get_block(number: int):
        with runtime.lock:
            block = node.block_by_number(number)
        if block is None:
            raise HTTPException(status_code=404, detail="no such block")
        d = block_to_json(block)
        d["mined_on"] = _mined_on(block.timestamp)
        return d

    @app.get("/tx/{tx_hash}")
    def get_tx(tx_hash: str):
        try:
            h = digest_from_hex(tx_hash)
        except CryptoError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with runtime.lock:
            found = node.tx_by_hash(h)
            receipt = node.receipts.get(h)
        if found is None:
            raise HTTPException(status_code=404, detail="unknown transaction")
        tx, number = found
        d = tx_to_json(tx)
        d["block_number"] = number
        if receipt is not None:
            d["status"] = receipt.status
            d["reason"] = receipt.reason
            d["gas_used"] = receipt.gas_used
            d["fee_wei"] = str(receipt.fee_wei)
        return d

    @app.get("/chain/head")
    def get_head():
        with runtime.lock:
            return {
                "number": node.head_number,
                "block_hash": digest_to_hex(node.head_hash),
                "final_depth": consensus.finality_depth(genesis),
            }

    @app.get("/validators")
    def get_validators():
        with runtime.lock:
            height = node.head_number + 1
        return {
            "authorities": [address_to_hex(a) for a in genesis.authorities],
            "in_turn_proposer": address_to_hex(expected_proposer(height, genesis.authorities)),
        }

    @app.get("/status")
    def get_status():
        with runtime.lock:
            head = node.head_number
        return {
            "chain_id": genesis.chain_id,
            "gas_limit": genesis.gas_limit,
            "gas_price_suggestion": genesis.gas_price_suggestion,
            "mode": genesis.mode.value,
            "head_number": head,
            "contract_address": address_to_hex(genesis.contract_address),
            "owner": address_to_hex(genesis.owner),
            "faucet_enabled": runtime.config.faucet_enabled and genesis.faucet_enabled,
            "demo_grants": runtime.config.owner_key is not None,
        }

    @app.post("/gossip/tx", status_code=202)
    def gossip_tx(body: dict):
        tx = tx_from_json(body)
        is_new, err = runtime.receive_gossip_tx(tx)
        return {"new": is_new, "error": err}

    @app.post("/gossip/block", status_code=202)
    def gossip_block(body: dict):
        from .wire import block_from_json

        block = block_from_json(body)
        status = runtime.receive_gossip_block(block)
        return {"status": status}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
