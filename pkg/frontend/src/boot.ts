// Page entry point: start the console against the configured gateway.

import { setupConsole } from "./main.js";

setupConsole(window.TELEHAPTIC_GATEWAY ?? "ws://127.0.0.1:8765");
