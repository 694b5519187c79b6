import { SandboxApp } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root element");
const app = new SandboxApp(root, "");
void app.start();
