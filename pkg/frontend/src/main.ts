// Browser entry point.

import { ServiceClient } from "./client.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const port = params.get("port") ?? "8701";
const scale = Number(params.get("force_scale") ?? "0.05");

const client = new ServiceClient({ url: `ws://127.0.0.1:${port}/ws` });
const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");
createApp(root, client, scale);
client.connect();
