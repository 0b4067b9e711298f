import threading
import time

import pytest
from fastapi.testclient import TestClient

from conftest import PRODUCT_A, PRODUCT_B, kp, make_genesis, rate_tx
from ratingchain.crypto import address_to_hex, digest_to_hex
from ratingchain.service import NodeConfig, NodeRuntime, create_app
from ratingchain.wire import save_genesis, tx_to_json


@pytest.fixture
def env(tmp_path):
    validator = kp("validator")
    owner = kp("owner")
    rater = kp("rater")
    genesis = make_genesis([validator], owner, raters=[rater])
    gpath = tmp_path / "genesis.json"
    save_genesis(genesis, gpath)
    config = NodeConfig(
        genesis_path=str(gpath),
        data_dir=str(tmp_path / "data"),
        validator_key=validator,
        owner_key=owner,
    )
    runtime = NodeRuntime(config)
    client = TestClient(create_app(runtime))
    return {
        "validator": validator, "owner": owner, "rater": rater,
        "genesis": genesis, "runtime": runtime, "client": client,
        "tmp_path": tmp_path,
    }


def seal(runtime, now=None):
    with runtime.lock:
        prev = runtime.node.head_number
        block = runtime.node.try_seal(int(now if now is not None else time.time()))
        if block is not None:
            runtime._persist_new_blocks(prev)
    return block


class TestStatusAndMeta:
    def test_status_fields(self, env):
        s = env["client"].get("/status").json()
        assert s["chain_id"] == 5777
        assert s["gas_limit"] == 6721975
        assert s["gas_price_suggestion"] == 2000000000
        assert s["mode"] == "corrected"
        assert s["head_number"] == 0
        assert s["owner"] == address_to_hex(env["owner"].address)
        assert s["faucet_enabled"] is True
        assert s["demo_grants"] is True

    def test_validators_endpoint(self, env):
        v = env["client"].get("/validators").json()
        assert v["authorities"] == [address_to_hex(env["validator"].address)]
        assert v["in_turn_proposer"] == address_to_hex(env["validator"].address)

    def test_chain_head_with_empty_chain(self, env):
        h = env["client"].get("/chain/head").json()
        assert h["number"] == 0
        assert h["block_hash"] == digest_to_hex(env["genesis"].genesis_hash())
        assert h["final_depth"] == 2


class TestTransactionFlow:
    def test_submit_seal_receipt_success(self, env):
        client, runtime = env["client"], env["runtime"]
        tx = rate_tx(env["rater"], PRODUCT_A, 85)
        r = client.post("/transactions", json=tx_to_json(tx))
        assert r.status_code == 202
        assert r.json()["tx_hash"] == digest_to_hex(tx.tx_hash)

        # pending until sealed
        r = client.get(f"/receipts/{digest_to_hex(tx.tx_hash)}")
        assert r.status_code == 404 and r.json()["detail"] == "pending"

        assert seal(runtime) is not None
        rec = client.get(f"/receipts/{digest_to_hex(tx.tx_hash)}").json()
        assert rec["status"] == "Success"
        assert rec["gas_used"] == 51456
        assert rec["block_number"] == 1

        rating = client.get(f"/products/{address_to_hex(PRODUCT_A)}/rating").json()
        assert rating == {"rating": 85, "no_raters": 1, "found": True}

    def test_revert_reason_surfaces_verbatim(self, env):
        client, runtime = env["client"], env["runtime"]
        outsider = kp("outsider")
        with runtime.lock:
            runtime.node.state.account(outsider.address).balance = 10**21
        tx = rate_tx(outsider, PRODUCT_A, 85)
        client.post("/transactions", json=tx_to_json(tx))
        seal(runtime)
        rec = env["client"].get(f"/receipts/{digest_to_hex(tx.tx_hash)}").json()
        assert rec["status"] == "Reverted"
        assert rec["reason"] == "rater has no rating right"

    def test_malformed_body_is_a_violation(self, env):
        r = env["client"].post("/transactions", json={"function": "SelfDestruct"})
        assert r.status_code == 400
        assert "violation" in r.json()["detail"]

    def test_bad_signature_is_a_violation(self, env):
        import dataclasses

        tx = rate_tx(env["rater"], PRODUCT_A, 85)
        bad = dataclasses.replace(tx, signature=bytes(64))
        r = env["client"].post("/transactions", json=tx_to_json(bad))
        assert r.status_code == 400
        assert r.json()["detail"]["violation"] == "BadSignature"

    def test_unknown_receipt_404(self, env):
        r = env["client"].get("/receipts/" + "0x" + "11" * 32)
        assert r.status_code == 404 and r.json()["detail"] == "unknown transaction"


class TestExplorer:
    def fill_chain(self, env):
        client, runtime = env["client"], env["runtime"]
        tx = rate_tx(env["rater"], PRODUCT_A, 70)
        client.post("/transactions", json=tx_to_json(tx))
        seal(runtime)
        return tx

    def test_products_listing(self, env):
        self.fill_chain(env)
        items = env["client"].get("/products").json()
        assert [p["name"] for p in items] == ["Kaza Restaurant", "House Cafe"]
        assert items[0]["rating"] == 70 and items[0]["no_raters"] == 1
        assert items[0]["id"] == 1

    def test_block_summaries_and_detail(self, env):
        self.fill_chain(env)
        summaries = env["client"].get("/blocks").json()
        assert len(summaries) == 1
        assert summaries[0]["tx_count"] == 1
        assert summaries[0]["gas_used"] == 51456
        assert len(summaries[0]["mined_on"]) == 19  # "YYYY-mm-dd HH:MM:SS"
        detail = env["client"].get("/blocks/1").json()
        assert detail["number"] == 1
        assert detail["transactions"][0]["function"] == "SetRate"
        assert env["client"].get("/blocks/99").status_code == 404

    def test_tx_lookup(self, env):
        tx = self.fill_chain(env)
        d = env["client"].get(f"/tx/{digest_to_hex(tx.tx_hash)}").json()
        assert d["block_number"] == 1
        assert d["status"] == "Success"
        assert env["client"].get("/tx/" + "0x" + "22" * 32).status_code == 404

    def test_account_view(self, env):
        self.fill_chain(env)
        a = env["client"].get(f"/accounts/{address_to_hex(env['rater'].address)}").json()
        assert a["nonce"] == 1
        assert a["weight"] == 1
        assert a["rated_products"] == [address_to_hex(PRODUCT_A)]
        assert int(a["balance_wei"]) == 10**21 - 51456

    def test_unknown_account_reads_zero(self, env):
        a = env["client"].get(f"/accounts/{address_to_hex(kp('ghost').address)}").json()
        assert a == {
            "address": address_to_hex(kp("ghost").address),
            "balance_wei": "0", "nonce": 0, "weight": 0, "rated_products": [],
        }


class TestFaucetAndGrants:
    def test_faucet_mints_and_rate_limits(self, env):
        client, runtime = env["client"], env["runtime"]
        newcomer = kp("newcomer")
        r = client.post("/faucet", json={"address": address_to_hex(newcomer.address)})
        assert r.status_code == 200
        assert r.json()["minted_wei"] == str(10**18)
        seal(runtime)
        bal = client.get(f"/accounts/{address_to_hex(newcomer.address)}").json()
        assert bal["balance_wei"] == str(10**18)
        # second request inside the 10-block window is throttled
        r2 = client.post("/faucet", json={"address": address_to_hex(newcomer.address)})
        assert r2.status_code == 429

    def test_faucet_disabled_403(self, tmp_path):
        validator = kp("validator")
        genesis = make_genesis([validator], kp("owner"), faucet=False)
        gpath = tmp_path / "genesis.json"
        save_genesis(genesis, gpath)
        runtime = NodeRuntime(NodeConfig(
            genesis_path=str(gpath), data_dir=str(tmp_path / "d"), validator_key=validator,
        ))
        client = TestClient(create_app(runtime))
        r = client.post("/faucet", json={"address": address_to_hex(kp("x").address)})
        assert r.status_code == 403

    def test_demo_grant_gives_rating_right(self, env):
        client, runtime = env["client"], env["runtime"]
        newcomer = kp("newcomer")
        client.post("/faucet", json={"address": address_to_hex(newcomer.address)})
        r = client.post("/demo/grant", json={"address": address_to_hex(newcomer.address)})
        assert r.status_code == 200
        seal(runtime)
        a = client.get(f"/accounts/{address_to_hex(newcomer.address)}").json()
        assert a["weight"] == 1
        tx = rate_tx(newcomer, PRODUCT_B, 66, gas_price=1)
        client.post("/transactions", json=tx_to_json(tx))
        seal(runtime)
        rec = client.get(f"/receipts/{digest_to_hex(tx.tx_hash)}").json()
        assert rec["status"] == "Success"


class TestPersistence:
    def test_restart_recovers_chain_and_state(self, env):
        client, runtime = env["client"], env["runtime"]
        tx = rate_tx(env["rater"], PRODUCT_A, 44)
        client.post("/transactions", json=tx_to_json(tx))
        seal(runtime)
        runtime.log.close()

        reborn = NodeRuntime(runtime.config)
        client2 = TestClient(create_app(reborn))
        assert client2.get("/chain/head").json()["number"] == 1
        rating = client2.get(f"/products/{address_to_hex(PRODUCT_A)}/rating").json()
        assert rating["rating"] == 44
        rec = client2.get(f"/receipts/{digest_to_hex(tx.tx_hash)}").json()
        assert rec["status"] == "Success"
        reborn.log.close()

    def test_torn_write_recovery_on_restart(self, env):
        client, runtime = env["client"], env["runtime"]
        for value, product in ((44, PRODUCT_A), (55, PRODUCT_B)):
            tx = rate_tx(env["rater"], product, value,
                         nonce=0 if product is PRODUCT_A else 1)
            client.post("/transactions", json=tx_to_json(tx))
            seal(runtime)
        runtime.log.close()
        path = runtime.log.path
        raw = path.read_bytes()
        path.write_bytes(raw + raw[: len(raw) // 3])  # simulate a torn third record

        reborn = NodeRuntime(runtime.config)
        assert reborn.node.head_number == 2
        reborn.log.close()


class TestGossipEndpoints:
    def test_gossip_tx_and_block_roundtrip(self, env, tmp_path):
        # second node shares the genesis but holds no validator key
        runtime_a = env["runtime"]
        client_a = env["client"]
        config_b = NodeConfig(
            genesis_path=runtime_a.config.genesis_path,
            data_dir=str(tmp_path / "data-b"),
        )
        runtime_b = NodeRuntime(config_b)
        client_b = TestClient(create_app(runtime_b))

        tx = rate_tx(env["rater"], PRODUCT_A, 91)
        r = client_b.post("/gossip/tx", json=tx_to_json(tx))
        assert r.status_code == 202 and r.json()["new"] is True
        # duplicate gossip is acknowledged but not new
        assert client_b.post("/gossip/tx", json=tx_to_json(tx)).json()["new"] is False

        client_a.post("/transactions", json=tx_to_json(tx))
        block = seal(runtime_a)
        from ratingchain.wire import block_to_json

        r = client_b.post("/gossip/block", json=block_to_json(block))
        assert r.json()["status"] == "extended"
        assert client_b.get("/chain/head").json() == client_a.get("/chain/head").json()
        rating = client_b.get(f"/products/{address_to_hex(PRODUCT_A)}/rating").json()
        assert rating["rating"] == 91

    def test_tampered_gossip_block_rejected(self, env, tmp_path):
        import dataclasses

        runtime_a, client_a = env["runtime"], env["client"]
        runtime_b = NodeRuntime(NodeConfig(
            genesis_path=runtime_a.config.genesis_path, data_dir=str(tmp_path / "data-b"),
        ))
        client_b = TestClient(create_app(runtime_b))
        tx = rate_tx(env["rater"], PRODUCT_A, 91)
        client_a.post("/transactions", json=tx_to_json(tx))
        block = seal(runtime_a)
        from ratingchain.wire import block_to_json

        tampered = dataclasses.replace(block, gas_used=block.gas_used + 1)
        r = client_b.post("/gossip/block", json=block_to_json(tampered))
        assert r.json()["status"] == "rejected:HashMismatch"
        assert client_b.get("/chain/head").json()["number"] == 0


class TestLiveTwoNodeSync:
    def test_background_threads_propagate_blocks(self, tmp_path):
        """Spin up two real HTTP servers; the follower must catch up via sync."""
        import uvicorn

        validator = kp("validator")
        owner = kp("owner")
        rater = kp("rater")
        genesis = make_genesis([validator], owner, raters=[rater])
        gpath = tmp_path / "genesis.json"
        save_genesis(genesis, gpath)

        ports = (7591, 7592)
        configs = [
            NodeConfig(
                genesis_path=str(gpath), data_dir=str(tmp_path / f"d{i}"),
                port=port, validator_key=validator if i == 0 else None,
                peers=[f"http://127.0.0.1:{ports[1 - i]}"],
                seal_interval=0.1, sync_interval=0.3,
            )
            for i, port in enumerate(ports)
        ]
        runtimes = [NodeRuntime(c) for c in configs]
        servers = []
        for rt in runtimes:
            app = create_app(rt)
            server = uvicorn.Server(uvicorn.Config(
                app, host="127.0.0.1", port=rt.config.port, log_level="error",
            ))
            th = threading.Thread(target=server.run, daemon=True)
            th.start()
            servers.append(server)
            rt.start_background()
        try:
            deadline = time.time() + 10
            while time.time() < deadline and not all(s.started for s in servers):
                time.sleep(0.05)
            assert all(s.started for s in servers), "servers failed to start"

            import httpx

            tx = rate_tx(rater, PRODUCT_A, 73)
            httpx.post(f"http://127.0.0.1:{ports[0]}/transactions", json=tx_to_json(tx))
            deadline = time.time() + 15
            follower_head = 0
            while time.time() < deadline:
                follower_head = httpx.get(
                    f"http://127.0.0.1:{ports[1]}/chain/head"
                ).json()["number"]
                if follower_head >= 1:
                    break
                time.sleep(0.2)
            assert follower_head >= 1, "follower never caught up"
            rating = httpx.get(
                f"http://127.0.0.1:{ports[1]}/products/{address_to_hex(PRODUCT_A)}/rating"
            ).json()
            assert rating == {"rating": 73, "no_raters": 1, "found": True}
        finally:
            for rt in runtimes:
                rt.stop()
            for s in servers:
                s.should_exit = True
            time.sleep(0.5)
