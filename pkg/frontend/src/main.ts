import { NodeClient } from "./api";
import { mountApp } from "./ui";
import "./style.css";

const nodeUrl = new URLSearchParams(location.search).get("node") ?? "http://127.0.0.1:7545";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
void mountApp(root, new NodeClient(nodeUrl));
