"""Operator and rater command line.

Keys are generated and used locally: the node never sees a secret key.
Exit codes: 0 ok, 2 usage error, 3 node or validation error.
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import httpx

from . import costs as costs_mod
from . import netsim
from .crypto import (
    CryptoError,
    KeyPair,
    address_from_hex,
    address_to_hex,
    generate_keypair,
    hash32,
)
from .ledger import CallFn, CallPayload, GasSchedule, Genesis, Transaction
from .wire import (
    genesis_to_json,
    keypair_from_json,
    keypair_to_json,
    tx_to_json,
)

DEFAULT_NODE = "http://127.0.0.1:7545"
NODE_ERROR = 3


def _fail(message: str) -> None:
    click.echo(message, err=True)
    sys.exit(NODE_ERROR)


def _load_key(path: str) -> KeyPair:
    try:
        with open(path, encoding="utf-8") as fh:
            return keypair_from_json(json.load(fh))
    except (OSError, ValueError) as exc:
        _fail(f"cannot load keypair {path}: {exc}")


def _save_key(kp: KeyPair, path: str) -> None:
    out = Path(path)
    out.write_text(json.dumps(keypair_to_json(kp.secret_key, kp.public_key, kp.address), indent=2) + "\n")
    os.chmod(out, 0o600)


def _get(node: str, path: str, **params):
    try:
        resp = httpx.get(f"{node}{path}", params=params or None, timeout=10.0)
    except httpx.HTTPError as exc:
        _fail(f"node unreachable: {exc}")
    if resp.status_code >= 400:
        _fail(f"node error {resp.status_code}: {resp.text}")
    return resp.json()


def _post(node: str, path: str, body: dict):
    try:
        resp = httpx.post(f"{node}{path}", json=body, timeout=10.0)
    except httpx.HTTPError as exc:
        _fail(f"node unreachable: {exc}")
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        if isinstance(detail, dict):
            detail = detail.get("violation", detail)
        _fail(f"rejected: {detail}")
    return resp.json()


def _send_call(node: str, key: KeyPair, call: CallPayload, wait: bool = True) -> dict:
    status = _get(node, "/status")
    account = _get(node, f"/accounts/{address_to_hex(key.address)}")
    tx = Transaction(
        nonce=int(account["nonce"]),
        sender=key.address,
        sender_pubkey=key.public_key,
        to=address_from_hex(status["contract_address"]),
        value=0,
        gas_limit=int(status["gas_limit"]),
        gas_price=int(status["gas_price_suggestion"]),
        call=call,
    ).signed(key.secret_key)
    result = _post(node, "/transactions", tx_to_json(tx))
    tx_hash = result["tx_hash"]
    if not wait:
        return {"tx_hash": tx_hash}
    deadline = time.time() + 30
    while time.time() < deadline:
        try:
            resp = httpx.get(f"{node}/receipts/{tx_hash}", timeout=10.0)
        except httpx.HTTPError as exc:
            _fail(f"node unreachable: {exc}")
        if resp.status_code == 200:
            receipt = resp.json()
            if receipt["status"] == "Reverted":
                _fail(receipt["reason"])
            return receipt
        time.sleep(0.3)
    _fail(f"timed out waiting for receipt of {tx_hash}")


def _table(rows: list[dict]) -> str:
    if not rows:
        return "(empty)"
    cols = list(rows[0].keys())
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    lines += ["  ".join(str(r.get(c, "")).ljust(widths[c]) for c in cols) for r in rows]
    return "\n".join(lines)


@click.group()
def main():
    """Permissioned PoA rating chain tools."""


@main.command()
@click.option("--out", required=True, type=click.Path(), help="keypair file to write")
@click.option("--seed", default=None, help="32-byte hex seed for a deterministic key")
def keygen(out, seed):
    """Generate a keypair file (secret key stays local, file mode 0600)."""
    if seed is not None:
        raw = bytes.fromhex(seed.removeprefix("0x"))
    else:
        raw = os.urandom(32)
    kp = generate_keypair(raw)
    _save_key(kp, out)
    click.echo(f"address {address_to_hex(kp.address)}")


@main.command("genesis-init")
@click.option("--out", required=True, type=click.Path())
@click.option("--authority", "authorities", multiple=True, required=True, help="validator address (repeatable)")
@click.option("--owner", required=True, help="contract owner address")
@click.option("--alloc", "allocs", multiple=True, help="ADDRESS=WEI initial balance (repeatable)")
@click.option("--product", "products", multiple=True, help="ADDRESS=NAME preloaded product (repeatable)")
@click.option("--rater", "raters", multiple=True, help="pre-granted rater address (repeatable)")
@click.option("--chain-id", default=5777, show_default=True)
@click.option("--gas-limit", default=6721975, show_default=True)
@click.option("--mode", type=click.Choice(["corrected", "paper_literal"]), default="corrected", show_default=True)
@click.option("--faucet/--no-faucet", default=True, show_default=True)
def genesis_init(out, authorities, owner, allocs, products, raters, chain_id, gas_limit, mode, faucet):
    """Author a genesis file."""
    from .contract import AveragingMode

    try:
        allocations = []
        for a in allocs:
            addr, _, wei = a.partition("=")
            allocations.append((address_from_hex(addr), int(wei)))
        prods = []
        for p in products:
            addr, _, name = p.partition("=")
            prods.append((address_from_hex(addr), name))
        genesis = Genesis(
            chain_id=chain_id,
            gas_limit=gas_limit,
            authorities=tuple(address_from_hex(a) for a in authorities),
            owner=address_from_hex(owner),
            contract_address=hash32(b"transparent-rating:" + str(chain_id).encode())[-20:],
            mode=AveragingMode(mode),
            faucet_enabled=faucet,
            allocations=tuple(allocations),
            products=tuple(prods),
            raters=tuple(address_from_hex(r) for r in raters),
        )
    except (CryptoError, ValueError) as exc:
        raise click.UsageError(str(exc))
    Path(out).write_text(json.dumps(genesis_to_json(genesis), indent=2) + "\n")
    click.echo(f"wrote {out} (contract {address_to_hex(genesis.contract_address)})")


@main.command("demo-init")
@click.argument("directory", type=click.Path())
def demo_init(directory):
    """Write a single-validator demo setup: keys, genesis, data dir."""
    from .contract import AveragingMode

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    validator = generate_keypair(hash32(b"demo-validator"))
    owner = generate_keypair(hash32(b"demo-owner"))
    _save_key(validator, d / "validator.key.json")
    _save_key(owner, d / "owner.key.json")
    restaurants = ["Kaza Restaurant", "4 Season Restaurant", "Ming Restaurant", "House Cafe"]
    genesis = Genesis(
        authorities=(validator.address,),
        owner=owner.address,
        contract_address=hash32(b"transparent-rating:demo")[-20:],
        mode=AveragingMode.CORRECTED,
        faucet_enabled=True,
        allocations=((validator.address, 10**24), (owner.address, 10**24)),
        products=tuple(
            (hash32(f"demo-product:{i}".encode())[-20:], name)
            for i, name in enumerate(restaurants)
        ),
    )
    (d / "genesis.json").write_text(json.dumps(genesis_to_json(genesis), indent=2) + "\n")
    (d / "data").mkdir(exist_ok=True)
    click.echo(f"demo setup in {d}: run-node --genesis {d / 'genesis.json'} "
               f"--data-dir {d / 'data'} --key {d / 'validator.key.json'} "
               f"--owner-key {d / 'owner.key.json'}")


@main.command("run-node")
@click.option("--genesis", "genesis_path", required=True, type=click.Path(exists=True))
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--key", "key_path", default=None, type=click.Path(exists=True), help="validator keypair (omit for an observer)")
@click.option("--owner-key", default=None, type=click.Path(exists=True), help="enable demo grant endpoint")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=7545, show_default=True)
@click.option("--peer", "peers", multiple=True, help="peer base URL (repeatable)")
@click.option("--faucet/--no-faucet", default=True, show_default=True)
@click.option("--faucet-grant", default=10**18, show_default=True, help="wei per faucet grant")
@click.option("--ui-dir", default=None, type=click.Path(), help="static UI assets served at /ui")
def run_node(genesis_path, data_dir, key_path, owner_key, host, port, peers, faucet, faucet_grant, ui_dir):
    """Run a node (validator or observer) with the HTTP API."""
    import uvicorn

    from .service import NodeConfig, NodeRuntime, create_app

    config = NodeConfig(
        genesis_path=genesis_path,
        data_dir=data_dir,
        host=host,
        port=port,
        validator_key=_load_key(key_path) if key_path else None,
        owner_key=_load_key(owner_key) if owner_key else None,
        peers=list(peers),
        faucet_enabled=faucet,
        faucet_grant_wei=faucet_grant,
    )
    try:
        runtime = NodeRuntime(config)
    except Exception as exc:
        _fail(f"startup failed: {exc}")
    runtime.start_background()
    app = create_app(runtime, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        runtime.stop()


@main.command()
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--key", "key_path", required=True, type=click.Path(exists=True), help="owner keypair file")
@click.option("--rater", required=True, help="rater address to grant")
def grant(node, key_path, rater):
    """Grant rating rights to an address (owner only)."""
    key = _load_key(key_path)
    receipt = _send_call(node, key, CallPayload(CallFn.GIVE_RIGHT_TO_RATE, rater=address_from_hex(rater)))
    click.echo(f"granted: tx {receipt['tx_hash']} gas_used {receipt['gas_used']}")


@main.command()
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--key", "key_path", required=True, type=click.Path(exists=True), help="rater keypair file")
@click.option("--product", required=True)
@click.option("--value", required=True, type=click.IntRange(0, 100))
def rate(node, key_path, product, value):
    """Submit a rating (0-100) for a product."""
    key = _load_key(key_path)
    receipt = _send_call(
        node, key, CallPayload(CallFn.SET_RATE, product=address_from_hex(product), value=value)
    )
    click.echo(f"rated: tx {receipt['tx_hash']} gas_used {receipt['gas_used']} fee_wei {receipt['fee_wei']}")


@main.command("create-product")
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--key", "key_path", required=True, type=click.Path(exists=True), help="owner keypair file")
@click.option("--product", required=True)
@click.option("--name", required=True)
def create_product(node, key_path, product, name):
    """Register a new product (owner only)."""
    key = _load_key(key_path)
    receipt = _send_call(
        node, key, CallPayload(CallFn.CREATE_PRODUCT, product=address_from_hex(product), name=name)
    )
    click.echo(f"created: tx {receipt['tx_hash']}")


@main.command()
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--product", required=True)
@click.option("--json", "as_json", is_flag=True)
def rating(node, product, as_json):
    """Print a product's current rating."""
    data = _get(node, f"/products/{product}/rating")
    if as_json:
        click.echo(json.dumps(data))
    else:
        click.echo(str(data["rating"]))


@main.command()
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def products(node, as_json):
    """List products with their average ratings."""
    data = _get(node, "/products")
    if as_json:
        click.echo(json.dumps(data, indent=2))
    else:
        click.echo(_table(data))


@main.command()
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--from", "frm", default=None, type=int)
@click.option("--to", default=None, type=int)
@click.option("--number", default=None, type=int, help="show one block in full")
@click.option("--json", "as_json", is_flag=True)
def blocks(node, frm, to, number, as_json):
    """Explore blocks (summaries, or one full block with --number)."""
    if number is not None:
        data = _get(node, f"/blocks/{number}")
        click.echo(json.dumps(data, indent=2))
        return
    params = {}
    if frm is not None:
        params["from"] = frm
    if to is not None:
        params["to"] = to
    data = _get(node, "/blocks", **params)
    if as_json:
        click.echo(json.dumps(data, indent=2))
    else:
        click.echo(_table(data))


@main.command()
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--address", required=True)
@click.option("--json", "as_json", is_flag=True)
def account(node, address, as_json):
    """Show an account's balance, nonce, and rating rights."""
    data = _get(node, f"/accounts/{address}")
    click.echo(json.dumps(data, indent=2) if as_json else _table([data]))


@main.command()
@click.option("--node", default=DEFAULT_NODE, show_default=True)
@click.option("--address", required=True)
def faucet(node, address):
    """Request trial funds from the node's faucet."""
    data = _post(node, "/faucet", {"address": address})
    click.echo(f"minted {data['minted_wei']} wei (tx {data['tx_hash']})")


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path(), help="write the report JSON here")
def sim(config_path, out):
    """Run a deterministic multi-node simulation from a config file."""
    try:
        config = netsim.load_config(config_path)
        report = netsim.run_simulation(config)
    except netsim.SimConfigError as exc:
        raise click.UsageError(str(exc))
    payload = report.to_json_bytes().decode()
    if out:
        Path(out).write_text(payload + "\n")
    data = report.data
    click.echo(
        f"converged={data['converged']} height="
        f"{max(n['height'] for n in data['nodes'].values())} "
        f"forks={data['fork_count']} events={data['events_processed']} "
        f"conservation_ok={data['conservation_ok']}"
    )
    if not out:
        click.echo(payload)
    if not data["converged"] or not data["conservation_ok"]:
        sys.exit(NODE_ERROR)


@main.command("cost-report")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
@click.option("--csv", "csv_out", default=None, type=click.Path(), help="also write plot-ready CSV")
def cost_report(input_path, as_json, csv_out):
    """Total the per-day cost of rating transactions (gas * price)."""
    try:
        days = costs_mod.load_input(input_path)
    except (costs_mod.CostReportError, ValueError, KeyError, OSError) as exc:
        raise click.UsageError(str(exc))
    report = costs_mod.cost_report(days, GasSchedule())
    rows = costs_mod.report_rows(report)
    if csv_out:
        import csv as _csv

        with open(csv_out, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    click.echo(json.dumps(rows, indent=2) if as_json else _table(rows))


if __name__ == "__main__":
    main()
