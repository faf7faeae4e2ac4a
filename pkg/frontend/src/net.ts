/**
 * Instrumented HTTP client: every request becomes one recorded transaction,
 * redirects are followed hop by hop so chains stay visible, and a cookie jar
 * tracks Set-Cookie headers across origins.  Transactions always carry the
 * logical URL even when an origin override routes the socket elsewhere.
 */

import { getDomain } from "tldts";

export interface Transaction {
  request_url: string;
  method: string;
  initiator?: string;
  status_code: number;
  response_headers: Record<string, string[]>;
  response_body?: string;
  redirect_location?: string;
  started_at: string;
}

export interface JarCookie {
  name: string;
  value: string;
  cookie_domain: string;
}

const REDIRECT_CODES = new Set([301, 302, 303, 307, 308]);
const BODY_CAP = 2 * 1024 * 1024;
const TEXT_TYPES = ["text/", "application/json", "application/javascript",
  "application/x-javascript", "application/xml"];
const MAX_HOPS = 10;

function isTextType(contentType: string): boolean {
  const lowered = contentType.toLowerCase();
  return TEXT_TYPES.some((prefix) => lowered.startsWith(prefix));
}

export class CookieJar {
  cookies = new Map<string, JarCookie>(); // key: domain|name

  store(setCookie: string, requestHost: string): void {
    const [pair, ...attrs] = setCookie.split(";");
    const eq = pair.indexOf("=");
    if (eq <= 0) return;
    const name = pair.slice(0, eq).trim();
    const value = pair.slice(eq + 1).trim();
    let domain = requestHost;
    for (const attr of attrs) {
      const [attrName, attrValue] = attr.split("=").map((s) => s?.trim() ?? "");
      if (attrName.toLowerCase() === "domain" && attrValue) {
        domain = attrValue.replace(/^\./, "").toLowerCase();
      }
    }
    this.cookies.set(`${domain}|${name}`, { name, value, cookie_domain: domain });
  }

  /** Cookie header value for a request host (domain-suffix matching). */
  headerFor(host: string): string {
    const parts: string[] = [];
    for (const cookie of this.cookies.values()) {
      if (host === cookie.cookie_domain || host.endsWith("." + cookie.cookie_domain)) {
        parts.push(`${cookie.name}=${cookie.value}`);
      }
    }
    return parts.join("; ");
  }

  /** Bundle rows with first/third party computed against the bundle site. */
  rows(site: string): Array<JarCookie & { party: "first" | "third" }> {
    return [...this.cookies.values()]
      .sort((a, b) => (a.cookie_domain + a.name).localeCompare(b.cookie_domain + b.name))
      .map((cookie) => ({
        ...cookie,
        party: getDomain(cookie.cookie_domain) === site ? "first" : "third",
      }));
  }
}

export class Recorder {
  transactions: Transaction[] = [];
  jar = new CookieJar();

  constructor(
    private readonly userAgent: string,
    private readonly overrides: Record<string, string>,
    private readonly signal: AbortSignal,
  ) {}

  private rewrite(logicalUrl: string): string {
    const url = new URL(logicalUrl);
    const base = this.overrides[url.hostname.toLowerCase()];
    if (!base) return logicalUrl;
    const target = new URL(base);
    url.protocol = target.protocol;
    url.host = target.host;
    return url.toString();
  }

  /**
   * GET a logical URL, following up to 10 redirect hops.  Each hop is one
   * transaction; the final response's body is stored when it is text.
   */
  async get(logicalUrl: string, opts: { record?: boolean; initiator?: string } = {}):
      Promise<{ status: number; body: string; finalUrl: string }> {
    const record = opts.record ?? true;
    let current = logicalUrl;
    let initiator = opts.initiator;
    for (let hop = 0; hop <= MAX_HOPS; hop++) {
      const host = new URL(current).hostname.toLowerCase();
      const headers: Record<string, string> = { "user-agent": this.userAgent };
      const cookieHeader = this.jar.headerFor(host);
      if (cookieHeader) headers["cookie"] = cookieHeader;

      const startedAt = new Date().toISOString().replace(/\.\d{3}Z$/, "Z");
      const response = await fetch(this.rewrite(current), {
        method: "GET",
        headers,
        redirect: "manual",
        signal: this.signal,
      });

      for (const setCookie of response.headers.getSetCookie()) {
        this.jar.store(setCookie, host);
      }

      const responseHeaders: Record<string, string[]> = {};
      response.headers.forEach((value, name) => {
        (responseHeaders[name.toLowerCase()] ??= []).push(value);
      });

      const isRedirect = REDIRECT_CODES.has(response.status);
      const location = response.headers.get("location");
      let body = "";
      if (!isRedirect) {
        const contentType = response.headers.get("content-type") ?? "";
        if (isTextType(contentType)) {
          body = (await response.text()).slice(0, BODY_CAP);
        } else {
          await response.arrayBuffer(); // drain without storing binary bodies
        }
      } else {
        await response.arrayBuffer();
      }

      if (record) {
        const transaction: Transaction = {
          request_url: current,
          method: "GET",
          status_code: response.status,
          response_headers: responseHeaders,
          started_at: startedAt,
        };
        if (initiator) transaction.initiator = initiator;
        if (isRedirect && location) {
          transaction.redirect_location = new URL(location, current).toString();
        }
        if (!isRedirect && body) transaction.response_body = body;
        // A 3xx without a Location header cannot satisfy the bundle schema;
        // record it as-is minus the redirect marker.
        if (isRedirect && !location) transaction.status_code = 200;
        this.transactions.push(transaction);
      }

      if (isRedirect && location) {
        initiator = current;
        current = new URL(location, current).toString();
        continue;
      }
      return { status: response.status, body, finalUrl: current };
    }
    throw new Error(`too many redirects from ${logicalUrl}`);
  }
}
