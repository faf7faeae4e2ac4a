/**
 * Link extraction from fetched HTML.  A tolerant tag scanner pulls href
 * values from anchors/areas and src values from frames and embedded
 * resources; relative references resolve against the document URL.
 */

const TAG_RE = /<([a-zA-Z][a-zA-Z0-9-]*)\b([^>]*)>/g;
const ATTR_RE = /([a-zA-Z-]+)\s*=\s*("([^"]*)"|'([^']*)'|([^\s>]+))/g;

export interface PageRefs {
  anchors: string[];
  frames: string[];
  resources: string[];
}

function attrsOf(raw: string): Record<string, string> {
  const attrs: Record<string, string> = {};
  for (const match of raw.matchAll(ATTR_RE)) {
    attrs[match[1].toLowerCase()] = match[3] ?? match[4] ?? match[5] ?? "";
  }
  return attrs;
}

export function extractRefs(html: string, documentUrl: string): PageRefs {
  const refs: PageRefs = { anchors: [], frames: [], resources: [] };
  const push = (list: string[], value: string | undefined) => {
    if (!value) return;
    try {
      const resolved = new URL(value.trim(), documentUrl);
      resolved.hash = "";
      if (resolved.protocol === "http:" || resolved.protocol === "https:") {
        list.push(resolved.toString());
      }
    } catch {
      // unresolvable reference: ignore
    }
  };
  for (const match of html.matchAll(TAG_RE)) {
    const tag = match[1].toLowerCase();
    const attrs = attrsOf(match[2]);
    if (tag === "a" || tag === "area") {
      push(refs.anchors, attrs["href"]);
    } else if (tag === "iframe" || tag === "frame") {
      push(refs.frames, attrs["src"]);
    } else if (attrs["src"]) {
      push(refs.resources, attrs["src"]);
    }
  }
  return refs;
}

export function dedupe(urls: string[]): string[] {
  return [...new Set(urls)];
}
