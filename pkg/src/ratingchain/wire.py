"""JSON wire formats: transactions, blocks, genesis, keypair files.

Wei amounts travel as decimal strings (they exceed the safe integer range
of JavaScript clients); gas, nonces, and heights are plain JSON numbers.
Addresses, digests, keys, and signatures are 0x-prefixed hex. Persisted
block-log records are parsed strictly (lowercase hex only) so any
tampering is detectable.
"""

from __future__ import annotations

import json
from typing import Any

from .contract import AveragingMode
from .crypto import (
    ADDRESS_LEN,
    DIGEST_LEN,
    PUBKEY_LEN,
    SIGNATURE_LEN,
    CryptoError,
    address_to_hex,
    bytes_from_hex,
    digest_to_hex,
)
from .ledger import Block, CallFn, CallPayload, GasSchedule, Genesis, Transaction


class WireError(ValueError):
    """Malformed wire object."""


def _addr(s: Any, strict: bool = False) -> bytes:
    try:
        return bytes_from_hex(s, ADDRESS_LEN, strict_case=strict)
    except CryptoError as exc:
        raise WireError(str(exc)) from exc


def _hexbytes(s: Any, n: int, strict: bool = False) -> bytes:
    try:
        return bytes_from_hex(s, n, strict_case=strict)
    except CryptoError as exc:
        raise WireError(str(exc)) from exc


def _uint(v: Any, what: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise WireError(f"{what} must be a nonnegative integer")
    return v


def _wei(v: Any, what: str) -> int:
    # tolerated as int for convenience, canonical form is a decimal string
    if isinstance(v, bool):
        raise WireError(f"{what} must be a decimal string")
    if isinstance(v, int):
        n = v
    elif isinstance(v, str) and v.isdigit() and (v == "0" or not v.startswith("0")):
        n = int(v)
    else:
        raise WireError(f"{what} must be a decimal string")
    if n < 0:
        raise WireError(f"{what} must be nonnegative")
    return n


def call_to_json(call: CallPayload) -> dict:
    args: dict[str, Any] = {}
    if call.function == CallFn.GIVE_RIGHT_TO_RATE:
        args["rater"] = address_to_hex(call.rater)
    elif call.function == CallFn.SET_RATE:
        args["product"] = address_to_hex(call.product)
        args["value"] = call.value
    elif call.function == CallFn.GET_RATE:
        args["product"] = address_to_hex(call.product)
    elif call.function == CallFn.CREATE_PRODUCT:
        args["product"] = address_to_hex(call.product)
        args["name"] = call.name
    return {"function": call.function.value, "args": args}


def call_from_json(function: Any, args: Any, strict: bool = False) -> CallPayload:
    try:
        fn = CallFn(function)
    except ValueError as exc:
        raise WireError(f"unknown function {function!r}") from exc
    if not isinstance(args, dict):
        raise WireError("args must be an object")
    if fn == CallFn.GIVE_RIGHT_TO_RATE:
        call = CallPayload(fn, rater=_addr(args.get("rater"), strict))
    elif fn == CallFn.SET_RATE:
        value = _uint(args.get("value"), "rating value")
        if value > 255:
            raise WireError("rating value exceeds wire range 0-255")
        call = CallPayload(fn, product=_addr(args.get("product"), strict), value=value)
    elif fn == CallFn.GET_RATE:
        call = CallPayload(fn, product=_addr(args.get("product"), strict))
    elif fn == CallFn.CREATE_PRODUCT:
        name = args.get("name")
        if not isinstance(name, str):
            raise WireError("product name must be a string")
        call = CallPayload(fn, product=_addr(args.get("product"), strict), name=name)
    else:  # FAUCET_MINT
        call = CallPayload(fn)
    return call


def tx_to_json(tx: Transaction) -> dict:
    d = {
        "nonce": tx.nonce,
        "from": address_to_hex(tx.sender),
        "sender_pubkey": "0x" + tx.sender_pubkey.hex(),
        "to": address_to_hex(tx.to),
        "value": str(tx.value),
        "gas_limit": tx.gas_limit,
        "gas_price": tx.gas_price,
        "signature": "0x" + tx.signature.hex(),
        "tx_hash": digest_to_hex(tx.tx_hash),
    }
    d.update(call_to_json(tx.call))
    return d


TX_KEYS = {
    "nonce", "from", "sender_pubkey", "to", "value",
    "gas_limit", "gas_price", "function", "args", "signature", "tx_hash",
}


def tx_from_json(obj: Any, strict: bool = False) -> Transaction:
    if not isinstance(obj, dict):
        raise WireError("transaction must be an object")
    unknown = set(obj) - TX_KEYS
    if unknown:
        raise WireError(f"unknown transaction fields: {sorted(unknown)}")
    tx = Transaction(
        nonce=_uint(obj.get("nonce"), "nonce"),
        sender=_addr(obj.get("from"), strict),
        sender_pubkey=_hexbytes(obj.get("sender_pubkey"), PUBKEY_LEN, strict),
        to=_addr(obj.get("to"), strict),
        value=_wei(obj.get("value"), "value"),
        gas_limit=_uint(obj.get("gas_limit"), "gas_limit"),
        gas_price=_uint(obj.get("gas_price"), "gas_price"),
        call=call_from_json(obj.get("function"), obj.get("args", {}), strict),
        signature=_hexbytes(obj.get("signature"), SIGNATURE_LEN, strict),
    )
    if "tx_hash" in obj:
        declared = _hexbytes(obj["tx_hash"], DIGEST_LEN, strict)
        if declared != tx.tx_hash:
            raise WireError("tx_hash does not match transaction contents")
    return tx


def block_to_json(block: Block) -> dict:
    return {
        "number": block.number,
        "parent_hash": digest_to_hex(block.parent_hash),
        "timestamp": block.timestamp,
        "proposer": address_to_hex(block.proposer),
        "proposer_pubkey": "0x" + block.proposer_pubkey.hex(),
        "out_of_turn": block.out_of_turn,
        "gas_used": block.gas_used,
        "gas_limit": block.gas_limit,
        "transactions": [tx_to_json(tx) for tx in block.transactions],
        "block_hash": digest_to_hex(block.block_hash),
        "proposer_signature": "0x" + block.proposer_signature.hex(),
    }


BLOCK_KEYS = {
    "number", "parent_hash", "timestamp", "proposer", "proposer_pubkey",
    "out_of_turn", "gas_used", "gas_limit", "transactions",
    "block_hash", "proposer_signature",
}


def block_from_json(obj: Any, strict: bool = False) -> Block:
    if not isinstance(obj, dict):
        raise WireError("block must be an object")
    unknown = set(obj) - BLOCK_KEYS
    if unknown:
        raise WireError(f"unknown block fields: {sorted(unknown)}")
    txs = obj.get("transactions")
    if not isinstance(txs, list):
        raise WireError("transactions must be a list")
    oot = obj.get("out_of_turn")
    if not isinstance(oot, bool):
        raise WireError("out_of_turn must be a boolean")
    return Block(
        number=_uint(obj.get("number"), "number"),
        parent_hash=_hexbytes(obj.get("parent_hash"), DIGEST_LEN, strict),
        timestamp=_uint(obj.get("timestamp"), "timestamp"),
        proposer=_addr(obj.get("proposer"), strict),
        proposer_pubkey=_hexbytes(obj.get("proposer_pubkey"), PUBKEY_LEN, strict),
        out_of_turn=oot,
        gas_used=_uint(obj.get("gas_used"), "gas_used"),
        gas_limit=_uint(obj.get("gas_limit"), "gas_limit"),
        transactions=tuple(tx_from_json(t, strict) for t in txs),
        block_hash=_hexbytes(obj.get("block_hash"), DIGEST_LEN, strict),
        proposer_signature=_hexbytes(obj.get("proposer_signature"), SIGNATURE_LEN, strict),
    )


def genesis_to_json(genesis: Genesis) -> dict:
    return {
        "chain_id": genesis.chain_id,
        "gas_limit": genesis.gas_limit,
        "slot_deadline_seconds": genesis.slot_deadline_seconds,
        "gas_price_suggestion": genesis.gas_price_suggestion,
        "authorities": [address_to_hex(a) for a in genesis.authorities],
        "owner": address_to_hex(genesis.owner),
        "contract_address": address_to_hex(genesis.contract_address),
        "mode": genesis.mode.value,
        "faucet_enabled": genesis.faucet_enabled,
        "allocations": {address_to_hex(a): str(b) for a, b in genesis.allocations},
        "products": [
            {"address": address_to_hex(a), "name": n} for a, n in genesis.products
        ],
        "raters": [address_to_hex(a) for a in genesis.raters],
        "gas_schedule": {
            "SetRate": genesis.schedule.set_rate,
            "GetRate": genesis.schedule.get_rate,
            "GiveRightToRate": genesis.schedule.give_right_to_rate,
            "CreateProduct": genesis.schedule.create_product,
        },
    }


def genesis_to_json_bytes(genesis: Genesis) -> bytes:
    return json.dumps(genesis_to_json(genesis), sort_keys=True, separators=(",", ":")).encode()


def genesis_from_json(obj: Any) -> Genesis:
    if not isinstance(obj, dict):
        raise WireError("genesis must be an object")
    sched = obj.get("gas_schedule", {})
    allocations = obj.get("allocations", {})
    if not isinstance(allocations, dict):
        raise WireError("allocations must be an object")
    try:
        mode = AveragingMode(obj.get("mode", "corrected"))
    except ValueError as exc:
        raise WireError(f"unknown averaging mode {obj.get('mode')!r}") from exc
    return Genesis(
        chain_id=_uint(obj.get("chain_id", 5777), "chain_id"),
        gas_limit=_uint(obj.get("gas_limit", 6721975), "gas_limit"),
        slot_deadline_seconds=_uint(obj.get("slot_deadline_seconds", 2), "slot_deadline_seconds"),
        gas_price_suggestion=_uint(obj.get("gas_price_suggestion", 2000000000), "gas_price_suggestion"),
        authorities=tuple(_addr(a) for a in obj.get("authorities", [])),
        owner=_addr(obj.get("owner")),
        contract_address=_addr(obj.get("contract_address")),
        mode=mode,
        faucet_enabled=bool(obj.get("faucet_enabled", True)),
        allocations=tuple((_addr(a), _wei(b, "allocation")) for a, b in allocations.items()),
        products=tuple(
            (_addr(p.get("address")), str(p.get("name"))) for p in obj.get("products", [])
        ),
        raters=tuple(_addr(a) for a in obj.get("raters", [])),
        schedule=GasSchedule(
            set_rate=_uint(sched.get("SetRate", 51456), "SetRate gas"),
            get_rate=_uint(sched.get("GetRate", 42689), "GetRate gas"),
            give_right_to_rate=_uint(sched.get("GiveRightToRate", 47800), "GiveRightToRate gas"),
            create_product=_uint(sched.get("CreateProduct", 53000), "CreateProduct gas"),
        ),
    )


def load_genesis(path) -> Genesis:
    with open(path, "r", encoding="utf-8") as fh:
        return genesis_from_json(json.load(fh))


def save_genesis(genesis: Genesis, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(genesis_to_json(genesis), fh, indent=2)
        fh.write("\n")


def keypair_to_json(secret_key: bytes, public_key: bytes, address: bytes) -> dict:
    return {
        "secret_hex": "0x" + secret_key.hex(),
        "public_hex": "0x" + public_key.hex(),
        "address": address_to_hex(address),
    }


def keypair_from_json(obj: Any):
    from .crypto import generate_keypair

    if not isinstance(obj, dict):
        raise WireError("keypair file must be an object")
    seed = _hexbytes(obj.get("secret_hex"), 32)
    kp = generate_keypair(seed)
    if "public_hex" in obj and _hexbytes(obj["public_hex"], PUBKEY_LEN) != kp.public_key:
        raise WireError("keypair file public key does not match secret key")
    return kp
