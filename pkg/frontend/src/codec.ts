/**
 * Canonical transaction serialization, mirrored bit-for-bit from the node.
 *
 * Layout: nonce u64 | sender_pubkey 32B | sender 20B | to 20B | value u128 |
 * gas_limit u64 | gas_price u64 | function tag u8 | function args.
 * All integers big-endian fixed width. The tx hash is sha256 of these bytes.
 */

import { sha256 } from "@noble/hashes/sha2.js";

export type CallFn = "GiveRightToRate" | "SetRate" | "GetRate" | "CreateProduct" | "FaucetMint";

export const FN_TAGS: Record<CallFn, number> = {
  GiveRightToRate: 0,
  SetRate: 1,
  GetRate: 2,
  CreateProduct: 3,
  FaucetMint: 4,
};

export interface CallArgs {
  rater?: string;
  product?: string;
  value?: number;
  name?: string;
}

export interface TxFields {
  nonce: number;
  sender: Uint8Array;       // 20-byte address
  senderPubkey: Uint8Array; // 32 bytes
  to: Uint8Array;           // 20-byte address
  value: bigint;            // wei
  gasLimit: number;
  gasPrice: number;
  fn: CallFn;
  args: CallArgs;
}

export function hexToBytes(hex: string, expectLen?: number): Uint8Array {
  const clean = hex.startsWith("0x") ? hex.slice(2) : hex;
  if (clean.length % 2 !== 0 || /[^0-9a-fA-F]/.test(clean)) {
    throw new Error(`malformed hex string: ${hex}`);
  }
  const out = new Uint8Array(clean.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(clean.slice(i * 2, i * 2 + 2), 16);
  }
  if (expectLen !== undefined && out.length !== expectLen) {
    throw new Error(`expected ${expectLen} bytes, got ${out.length}`);
  }
  return out;
}

export function bytesToHex(bytes: Uint8Array): string {
  let s = "0x";
  for (const b of bytes) s += b.toString(16).padStart(2, "0");
  return s;
}

function u64be(n: number | bigint): Uint8Array {
  const v = BigInt(n);
  if (v < 0n || v > 0xffffffffffffffffn) throw new Error(`u64 out of range: ${n}`);
  const out = new Uint8Array(8);
  new DataView(out.buffer).setBigUint64(0, v);
  return out;
}

function u128be(n: bigint): Uint8Array {
  if (n < 0n || n >= 1n << 128n) throw new Error(`u128 out of range: ${n}`);
  const out = new Uint8Array(16);
  new DataView(out.buffer).setBigUint64(0, n >> 64n);
  new DataView(out.buffer).setBigUint64(8, n & 0xffffffffffffffffn);
  return out;
}

function u32be(n: number): Uint8Array {
  const out = new Uint8Array(4);
  new DataView(out.buffer).setUint32(0, n);
  return out;
}

function concat(...parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

function argBytes(fn: CallFn, args: CallArgs): Uint8Array {
  switch (fn) {
    case "GiveRightToRate":
      return hexToBytes(args.rater!, 20);
    case "SetRate": {
      if (args.value! < 0 || args.value! > 255) throw new Error("rating out of wire range");
      return concat(hexToBytes(args.product!, 20), Uint8Array.of(args.value!));
    }
    case "GetRate":
      return hexToBytes(args.product!, 20);
    case "CreateProduct": {
      const raw = new TextEncoder().encode(args.name!);
      return concat(hexToBytes(args.product!, 20), u32be(raw.length), raw);
    }
    case "FaucetMint":
      return new Uint8Array(0);
  }
}

export function unsignedBytes(tx: TxFields): Uint8Array {
  return concat(
    u64be(tx.nonce),
    tx.senderPubkey,
    tx.sender,
    tx.to,
    u128be(tx.value),
    u64be(tx.gasLimit),
    u64be(tx.gasPrice),
    Uint8Array.of(FN_TAGS[tx.fn]),
    argBytes(tx.fn, tx.args),
  );
}

export function txHash(tx: TxFields): string {
  return bytesToHex(sha256(unsignedBytes(tx)));
}

/** Node wire format: wei as decimal strings, everything binary as 0x hex. */
export function txToJson(tx: TxFields, signature: Uint8Array): Record<string, unknown> {
  const args: Record<string, unknown> = {};
  if (tx.args.rater !== undefined) args.rater = tx.args.rater.toLowerCase();
  if (tx.args.product !== undefined) args.product = tx.args.product.toLowerCase();
  if (tx.args.value !== undefined) args.value = tx.args.value;
  if (tx.args.name !== undefined) args.name = tx.args.name;
  return {
    nonce: tx.nonce,
    from: bytesToHex(tx.sender),
    sender_pubkey: bytesToHex(tx.senderPubkey),
    to: bytesToHex(tx.to),
    value: tx.value.toString(),
    gas_limit: tx.gasLimit,
    gas_price: tx.gasPrice,
    function: tx.fn,
    args,
    signature: bytesToHex(signature),
    tx_hash: txHash(tx),
  };
}
