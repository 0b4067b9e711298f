/**
 * Typed client for the node's HTTP JSON API. Averages and balances are
 * always whatever the node reports; nothing is recomputed client-side.
 */

import { CallArgs, CallFn, hexToBytes, TxFields, txToJson } from "./codec";
import { Account, signTransaction } from "./signer";

export interface NodeStatus {
  chain_id: number;
  gas_limit: number;
  gas_price_suggestion: number;
  mode: string;
  head_number: number;
  contract_address: string;
  owner: string;
  faucet_enabled: boolean;
  demo_grants: boolean;
}

export interface ProductRow {
  id: number;
  address: string;
  name: string;
  rating: number;
  no_raters: number;
}

export interface AccountInfo {
  address: string;
  balance_wei: string;
  nonce: number;
  weight: number;
  rated_products: string[];
}

export interface Receipt {
  tx_hash: string;
  block_number: number;
  status: "Success" | "Reverted";
  reason: string;
  gas_used: number;
  fee_wei: string;
}

export interface BlockSummary {
  number: number;
  mined_on: string;
  timestamp: number;
  gas_used: number;
  tx_count: number;
}

export class NodeError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class RevertError extends Error {
  constructor(readonly reason: string) {
    super(reason);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const detail = (body as { detail?: unknown }).detail;
    const message =
      typeof detail === "string"
        ? detail
        : detail && typeof detail === "object" && "violation" in detail
          ? String((detail as { violation: unknown }).violation)
          : resp.statusText;
    throw new NodeError(message, resp.status);
  }
  return body as T;
}

export class NodeClient {
  constructor(readonly baseUrl: string) {}

  status(): Promise<NodeStatus> {
    return request(`${this.baseUrl}/status`);
  }

  products(): Promise<ProductRow[]> {
    return request(`${this.baseUrl}/products`);
  }

  account(address: string): Promise<AccountInfo> {
    return request(`${this.baseUrl}/accounts/${address}`);
  }

  blocks(): Promise<BlockSummary[]> {
    return request(`${this.baseUrl}/blocks`);
  }

  block(number: number): Promise<Record<string, unknown>> {
    return request(`${this.baseUrl}/blocks/${number}`);
  }

  faucet(address: string): Promise<{ minted_wei: string; tx_hash: string }> {
    return request(`${this.baseUrl}/faucet`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ address }),
    });
  }

  demoGrant(address: string): Promise<{ tx_hash: string }> {
    return request(`${this.baseUrl}/demo/grant`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ address }),
    });
  }

  async receipt(txHash: string): Promise<Receipt | null> {
    try {
      return await request<Receipt>(`${this.baseUrl}/receipts/${txHash}`);
    } catch (err) {
      if (err instanceof NodeError && err.status === 404) return null;
      throw err;
    }
  }

  /**
   * Build, sign, and submit a contract call, then poll for its receipt.
   * Throws RevertError with the node's verbatim reason string on revert.
   */
  async sendCall(
    account: Account,
    fn: CallFn,
    args: CallArgs,
    timeoutMs = 30_000,
  ): Promise<Receipt> {
    const status = await this.status();
    const info = await this.account(account.address);
    const tx: TxFields = {
      nonce: info.nonce,
      sender: hexToBytes(account.address, 20),
      senderPubkey: account.publicKey,
      to: hexToBytes(status.contract_address, 20),
      value: 0n,
      gasLimit: status.gas_limit,
      gasPrice: status.gas_price_suggestion,
      fn,
      args,
    };
    const signature = await signTransaction(account, tx);
    const submitted = await request<{ tx_hash: string }>(`${this.baseUrl}/transactions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(txToJson(tx, signature)),
    });
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
      const receipt = await this.receipt(submitted.tx_hash);
      if (receipt) {
        if (receipt.status === "Reverted") throw new RevertError(receipt.reason);
        return receipt;
      }
      await new Promise((r) => setTimeout(r, 250));
    }
    throw new NodeError(`timed out waiting for receipt of ${submitted.tx_hash}`, 0);
  }

  rate(account: Account, product: string, value: number): Promise<Receipt> {
    if (!Number.isInteger(value) || value < 0 || value > 100) {
      return Promise.reject(new Error("rating must be an integer 0-100"));
    }
    return this.sendCall(account, "SetRate", { product, value });
  }
}
