/** Browser entry point: configuration from the query string, then boot.

    index.html?api=http://127.0.0.1:8000&token=...

Both values persist in localStorage so reloads keep working mid-review.
*/

import { ApiClient } from "./api.js";
import { createApp } from "./app.js";
import { DraftStore } from "./drafts.js";

function setting(name: string, fallback: string): string {
  const key = `sme-ui:${name}`;
  const query = new URLSearchParams(window.location.search).get(name);
  if (query !== null) {
    window.localStorage.setItem(key, query);
    return query;
  }
  return window.localStorage.getItem(key) ?? fallback;
}

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}

const client = new ApiClient(
  setting("api", "http://127.0.0.1:8000"),
  setting("token", "inspector-token"),
);
const app = createApp(root, { client, drafts: new DraftStore() });
void app.refreshCases();
