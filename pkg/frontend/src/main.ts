// Browser entry point.

import { bootApp } from "./app.js";

bootApp(window);
