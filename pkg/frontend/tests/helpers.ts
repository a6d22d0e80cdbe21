/** Shared test scaffolding: canned JSON responses and a routing fake fetch. */

import type { FetchLike } from "../src/api.js";

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface RecordedRequest {
  method: string;
  url: string;
  headers: Record<string, string>;
  body: unknown;
}

export type Route = (request: RecordedRequest) => Response | Promise<Response>;

/** Fake fetch that records every request and routes "METHOD /path" keys. */
export function fakeFetch(routes: Record<string, Route>): {
  fetch: FetchLike;
  requests: RecordedRequest[];
} {
  const requests: RecordedRequest[] = [];
  const impl: FetchLike = async (input, init) => {
    const url = new URL(input);
    const method = init?.method ?? "GET";
    const recorded: RecordedRequest = {
      method,
      url: url.pathname,
      headers: Object.fromEntries(
        Object.entries((init?.headers ?? {}) as Record<string, string>),
      ),
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
    };
    requests.push(recorded);
    for (const [key, route] of Object.entries(routes)) {
      const [routeMethod, pattern] = key.split(" ", 2);
      if (routeMethod !== method) continue;
      const regex = new RegExp(`^${pattern!.replace(/:[a-z]+/g, "[^/]+")}$`);
      if (regex.test(url.pathname)) {
        return route(recorded);
      }
    }
    return jsonResponse(404, { detail: `no route for ${method} ${url.pathname}` });
  };
  return { fetch: impl, requests };
}
