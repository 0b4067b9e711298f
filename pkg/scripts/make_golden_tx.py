#!/usr/bin/env python3
"""Generate the golden transaction fixture with an independent serializer.

Deliberately does not import the package's codec: the byte layout is
restated here from scratch (struct packing only) so the committed digest
cross-checks the production serializer. Run once; output is committed at
tests/fixtures/golden_tx.json.
"""

import hashlib
import json
import struct
import sys
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

FN_TAGS = {"GiveRightToRate": 0, "SetRate": 1, "GetRate": 2, "CreateProduct": 3, "FaucetMint": 4}


def serialize_unsigned(tx: dict) -> bytes:
    out = struct.pack(">Q", tx["nonce"])
    out += bytes.fromhex(tx["sender_pubkey"][2:])
    out += bytes.fromhex(tx["from"][2:])
    out += bytes.fromhex(tx["to"][2:])
    out += int(tx["value"]).to_bytes(16, "big")
    out += struct.pack(">Q", tx["gas_limit"])
    out += struct.pack(">Q", tx["gas_price"])
    out += struct.pack(">B", FN_TAGS[tx["function"]])
    args = tx["args"]
    fn = tx["function"]
    if fn == "GiveRightToRate":
        out += bytes.fromhex(args["rater"][2:])
    elif fn == "SetRate":
        out += bytes.fromhex(args["product"][2:])
        out += struct.pack(">B", args["value"])
    elif fn == "GetRate":
        out += bytes.fromhex(args["product"][2:])
    elif fn == "CreateProduct":
        raw = args["name"].encode("utf-8")
        out += bytes.fromhex(args["product"][2:])
        out += struct.pack(">I", len(raw))
        out += raw
    return out


def main() -> None:
    seed = hashlib.sha256(b"golden-tx-sender").digest()
    priv = Ed25519PrivateKey.from_private_bytes(seed)
    pubkey = priv.public_key().public_bytes_raw()
    sender = hashlib.sha256(pubkey).digest()[-20:]
    product = hashlib.sha256(b"golden-product").digest()[-20:]
    contract = hashlib.sha256(b"golden-contract").digest()[-20:]

    tx = {
        "nonce": 7,
        "from": "0x" + sender.hex(),
        "sender_pubkey": "0x" + pubkey.hex(),
        "to": "0x" + contract.hex(),
        "value": "0",
        "gas_limit": 6721975,
        "gas_price": 2000000000,
        "function": "SetRate",
        "args": {"product": "0x" + product.hex(), "value": 80},
    }
    unsigned = serialize_unsigned(tx)
    tx["signature"] = "0x" + priv.sign(unsigned).hex()
    tx["tx_hash"] = "0x" + hashlib.sha256(unsigned).hexdigest()

    fixture = {
        "seed_hex": seed.hex(),
        "unsigned_hex": unsigned.hex(),
        "tx": tx,
    }
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "golden_tx.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture, indent=2) + "\n")
    print(f"wrote {out}: tx_hash {tx['tx_hash']}")


if __name__ == "__main__":
    main()
