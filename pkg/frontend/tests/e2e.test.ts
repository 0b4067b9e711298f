/**
 * End-to-end session against a real local node: create account, faucet,
 * grant, rate 80, read the table, repeat-rate for the exact revert,
 * explore the sealed block. Requires the backend package installed
 * (python3 importable) in the same workspace.
 */

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { NodeClient, RevertError } from "../src/api";
import { Account, createAccount } from "../src/signer";

const PORT = 7610;
const BASE = `http://127.0.0.1:${PORT}`;

let node: ChildProcess;
let workdir: string;

async function waitForNode(timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/status`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("node did not come up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "ratingchain-e2e-"));
  execFileSync("python3", ["-m", "ratingchain.cli", "demo-init", workdir]);
  node = spawn("python3", [
    "-m", "ratingchain.cli", "run-node",
    "--genesis", join(workdir, "genesis.json"),
    "--data-dir", join(workdir, "data"),
    "--key", join(workdir, "validator.key.json"),
    "--owner-key", join(workdir, "owner.key.json"),
    "--port", String(PORT),
  ], { stdio: "ignore" });
  await waitForNode();
}, 30_000);

afterAll(() => {
  node?.kill("SIGTERM");
  rmSync(workdir, { recursive: true, force: true });
});

describe("full rating session", () => {
  const client = new NodeClient(BASE);
  let account: Account;
  let product: string;

  it("connects and lists the demo products", async () => {
    const status = await client.status();
    expect(status.chain_id).toBe(5777);
    expect(status.demo_grants).toBe(true);
    const products = await client.products();
    expect(products.map((p) => p.name)).toContain("Kaza Restaurant");
    product = products.find((p) => p.name === "Kaza Restaurant")!.address;
  });

  it("creates an account and funds it from the faucet", async () => {
    account = await createAccount();
    const minted = await client.faucet(account.address);
    expect(BigInt(minted.minted_wei)).toBeGreaterThan(0n);
    const deadline = Date.now() + 15_000;
    let balance = 0n;
    while (Date.now() < deadline) {
      balance = BigInt((await client.account(account.address)).balance_wei);
      if (balance > 0n) break;
      await new Promise((r) => setTimeout(r, 250));
    }
    expect(balance).toBe(BigInt(minted.minted_wei));
  }, 20_000);

  it("receives a rating right via the demo grant", async () => {
    await client.demoGrant(account.address);
    const deadline = Date.now() + 15_000;
    let weight = 0;
    while (Date.now() < deadline) {
      weight = (await client.account(account.address)).weight;
      if (weight === 1) break;
      await new Promise((r) => setTimeout(r, 250));
    }
    expect(weight).toBe(1);
  }, 20_000);

  it("rates 80 and the table shows 80", async () => {
    const receipt = await client.rate(account, product, 80);
    expect(receipt.status).toBe("Success");
    expect(receipt.gas_used).toBe(51456);
    expect(BigInt(receipt.fee_wei)).toBe(51456n * 2000000000n);
    const products = await client.products();
    const row = products.find((p) => p.address === product)!;
    expect(row.rating).toBe(80);
    expect(row.no_raters).toBe(1);
  }, 40_000);

  it("rejects a repeat rating with the exact revert string", async () => {
    await expect(client.rate(account, product, 10)).rejects.toSatisfy(
      (err: unknown) =>
        err instanceof RevertError && err.reason === "The rater already rated.",
    );
  }, 40_000);

  it("explorer shows the rating block with its gas", async () => {
    const blocks = await client.blocks();
    expect(blocks.length).toBeGreaterThanOrEqual(3); // mint, grant, rating (+ revert)
    const ratingBlock = blocks.find((b) => b.gas_used === 51456);
    expect(ratingBlock).toBeDefined();
    const detail = await client.block(ratingBlock!.number);
    const txs = detail.transactions as Array<Record<string, unknown>>;
    expect(txs.some((t) => t.function === "SetRate" && t.from === account.address)).toBe(true);
  });

  it("account view reflects nonce and rated products", async () => {
    const info = await client.account(account.address);
    expect(info.nonce).toBe(2); // one success, one reverted (both consume nonces)
    expect(info.rated_products).toContain(product);
  });
});
