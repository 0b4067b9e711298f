/**
 * Local account: the secret key is generated in the browser, stored in
 * localStorage, and never leaves the page. Address = last 20 bytes of
 * sha256(public key).
 */

import * as ed from "@noble/ed25519";
import { sha256 } from "@noble/hashes/sha2.js";

import { bytesToHex, hexToBytes, TxFields, unsignedBytes } from "./codec";

const STORAGE_KEY = "ratingchain.account.v1";

export interface Account {
  secretKey: Uint8Array; // 32-byte seed
  publicKey: Uint8Array;
  address: string; // 0x hex, lowercase
}

export function deriveAddress(publicKey: Uint8Array): string {
  return bytesToHex(sha256(publicKey).slice(-20));
}

export async function accountFromSeed(seed: Uint8Array): Promise<Account> {
  if (seed.length !== 32) throw new Error("seed must be 32 bytes");
  const publicKey = await ed.getPublicKeyAsync(seed);
  return { secretKey: seed, publicKey, address: deriveAddress(publicKey) };
}

export async function createAccount(): Promise<Account> {
  const seed = crypto.getRandomValues(new Uint8Array(32));
  return accountFromSeed(seed);
}

export async function signTransaction(account: Account, tx: TxFields): Promise<Uint8Array> {
  return ed.signAsync(unsignedBytes(tx), account.secretKey);
}

export function saveAccount(account: Account, storage: Storage): void {
  storage.setItem(STORAGE_KEY, bytesToHex(account.secretKey));
}

export async function loadAccount(storage: Storage): Promise<Account | null> {
  const hex = storage.getItem(STORAGE_KEY);
  if (!hex) return null;
  try {
    return await accountFromSeed(hexToBytes(hex, 32));
  } catch {
    return null;
  }
}
