/**
 * DOM wiring: account banner, product table with rate controls, revert
 * toasts, and the block explorer. Pure functions of API responses so the
 * whole thing is testable against a fake client.
 */

import { NodeClient, NodeError, ProductRow, RevertError } from "./api";
import { Account, createAccount, loadAccount, saveAccount } from "./signer";

const POLL_MS = 1500;

export interface UiHandles {
  refresh: () => Promise<void>;
  stop: () => void;
  account: Account;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function showToast(root: HTMLElement, message: string, kind: "error" | "ok"): void {
  const toast = el("div", { class: `toast toast-${kind}`, role: "alert" }, message);
  root.appendChild(toast);
  setTimeout(() => toast.remove(), 6000);
}

function renderProducts(
  tbody: HTMLElement,
  products: ProductRow[],
  ratedProducts: Set<string>,
  onRate: (product: string, value: number) => void,
): void {
  tbody.replaceChildren();
  for (const p of products) {
    const row = el("tr", { "data-product": p.address });
    row.appendChild(el("td", {}, String(p.id)));
    row.appendChild(el("td", { class: "product-name" }, p.name));
    row.appendChild(el("td", { class: "avg-rate" }, String(p.rating)));
    row.appendChild(el("td", { class: "no-raters" }, String(p.no_raters)));

    const cell = el("td");
    const input = el("input", {
      type: "number", min: "0", max: "100", value: "80", class: "rate-input",
    }) as HTMLInputElement;
    const button = el("button", { class: "rate-button" },
      ratedProducts.has(p.address) ? "Rated" : "Rate") as HTMLButtonElement;
    button.addEventListener("click", () => {
      const value = Number(input.value);
      if (!Number.isInteger(value) || value < 0 || value > 100) return;
      onRate(p.address, value);
    });
    cell.append(input, button);
    row.appendChild(cell);
    tbody.appendChild(row);
  }
}

function renderBlocks(tbody: HTMLElement, blocks: { number: number; mined_on: string; gas_used: number; tx_count: number }[]): void {
  tbody.replaceChildren();
  for (const b of [...blocks].reverse()) {
    const row = el("tr", { "data-block": String(b.number) });
    row.appendChild(el("td", {}, String(b.number)));
    row.appendChild(el("td", {}, b.mined_on));
    row.appendChild(el("td", { class: "block-gas" }, String(b.gas_used)));
    row.appendChild(el("td", {}, `${b.tx_count} transaction${b.tx_count === 1 ? "" : "s"}`));
    tbody.appendChild(row);
  }
}

export async function mountApp(root: HTMLElement, client: NodeClient): Promise<UiHandles> {
  let account = await loadAccount(localStorage);
  if (!account) {
    account = await createAccount();
    saveAccount(account, localStorage);
  }

  root.replaceChildren();
  const banner = el("header", { class: "banner" });
  banner.appendChild(el("span", { class: "banner-label" }, "Your Account:"));
  banner.appendChild(el("code", { class: "account-address" }, account.address));
  const balance = el("span", { class: "account-balance" }, "");
  banner.appendChild(balance);
  const faucetBtn = el("button", { class: "faucet-button" }, "Get trial funds") as HTMLButtonElement;
  const grantBtn = el("button", { class: "grant-button" }, "Request rating right") as HTMLButtonElement;
  banner.append(faucetBtn, grantBtn);
  const offline = el("div", { class: "offline-banner hidden" }, "Node unreachable, retrying.");
  root.append(banner, offline);

  root.appendChild(el("h2", {}, "Products"));
  const productTable = el("table", { class: "products" });
  const productHead = el("thead");
  const headRow = el("tr");
  for (const h of ["ID", "Name", "Avg Rate", "Raters", ""]) headRow.appendChild(el("th", {}, h));
  productHead.appendChild(headRow);
  const productBody = el("tbody");
  productTable.append(productHead, productBody);
  root.appendChild(productTable);

  root.appendChild(el("h2", {}, "Blocks"));
  const blockTable = el("table", { class: "blocks" });
  const blockHead = el("thead");
  const blockHeadRow = el("tr");
  for (const h of ["Block", "Mined On", "Gas Used", "Transactions"]) blockHeadRow.appendChild(el("th", {}, h));
  blockHead.appendChild(blockHeadRow);
  const blockBody = el("tbody");
  blockTable.append(blockHead, blockBody);
  root.appendChild(blockTable);

  let busy = false;

  async function refresh(): Promise<void> {
    try {
      const [products, info, blocks, status] = await Promise.all([
        client.products(),
        client.account(account!.address),
        client.blocks(),
        client.status(),
      ]);
      offline.classList.add("hidden");
      balance.textContent = `${info.balance_wei} wei`;
      grantBtn.classList.toggle("hidden", !status.demo_grants || info.weight > 0);
      faucetBtn.classList.toggle("hidden", !status.faucet_enabled);
      renderProducts(productBody, products, new Set(info.rated_products), onRate);
      renderBlocks(blockBody, blocks);
    } catch (err) {
      if (err instanceof NodeError || err instanceof TypeError) {
        offline.classList.remove("hidden");
        return;
      }
      throw err;
    }
  }

  function onRate(product: string, value: number): void {
    if (busy) return;
    busy = true;
    for (const b of root.querySelectorAll<HTMLButtonElement>(".rate-button")) b.disabled = true;
    client
      .rate(account!, product, value)
      .then(() => showToast(root, `Rating submitted (${value})`, "ok"))
      .catch((err) => {
        // revert reasons are shown verbatim, exactly as the contract emits them
        const message = err instanceof RevertError ? err.reason : String((err as Error).message ?? err);
        showToast(root, message, "error");
      })
      .finally(() => {
        busy = false;
        for (const b of root.querySelectorAll<HTMLButtonElement>(".rate-button")) b.disabled = false;
        void refresh();
      });
  }

  faucetBtn.addEventListener("click", () => {
    client
      .faucet(account!.address)
      .then((r) => showToast(root, `Minted ${r.minted_wei} wei`, "ok"))
      .catch((err) => showToast(root, String((err as Error).message ?? err), "error"))
      .finally(() => void refresh());
  });

  grantBtn.addEventListener("click", () => {
    client
      .demoGrant(account!.address)
      .then(() => showToast(root, "Rating right requested", "ok"))
      .catch((err) => showToast(root, String((err as Error).message ?? err), "error"))
      .finally(() => void refresh());
  });

  await refresh();
  const timer = setInterval(() => void refresh(), POLL_MS);
  return { refresh, stop: () => clearInterval(timer), account };
}
