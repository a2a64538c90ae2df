/**
 * Lightweight reader for the DOT dialect the map service emits.
 *
 * This is a display-side reader, not a validator: it extracts nodes,
 * edges, and cluster memberships and throws DotReadError on anything it
 * cannot make sense of, so the caller can fall back to raw text.
 */

export interface ViewNode {
  id: string;
  label: string;
  name: string;
  description: string;
  keyFiles: string[];
}

export interface ViewEdge {
  src: string;
  dst: string;
  label: string;
  relation: string;
}

export interface ViewGraph {
  nodes: ViewNode[];
  edges: ViewEdge[];
  // cluster label -> member node ids
  groups: Map<string, Set<string>>;
}

export class DotReadError extends Error {}

type Token = { kind: 'id' | 'punct'; value: string };

function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (/\s/.test(ch)) {
      i += 1;
    } else if (ch === '"') {
      let value = '';
      i += 1;
      while (i < text.length && text[i] !== '"') {
        if (text[i] === '\\' && i + 1 < text.length) {
          const next = text[i + 1];
          value += next === 'n' ? '\n' : next;
          i += 2;
        } else {
          value += text[i];
          i += 1;
        }
      }
      if (i >= text.length) throw new DotReadError('unterminated string');
      i += 1;
      tokens.push({ kind: 'id', value });
    } else if (ch === '/' && text[i + 1] === '/') {
      while (i < text.length && text[i] !== '\n') i += 1;
    } else if (ch === '/' && text[i + 1] === '*') {
      const end = text.indexOf('*/', i + 2);
      if (end < 0) throw new DotReadError('unterminated comment');
      i = end + 2;
    } else if ('{}[];,='.includes(ch)) {
      tokens.push({ kind: 'punct', value: ch });
      i += 1;
    } else if (ch === '-' && text[i + 1] === '>') {
      tokens.push({ kind: 'punct', value: '->' });
      i += 2;
    } else if (/[A-Za-z0-9_.]/.test(ch)) {
      let value = '';
      while (i < text.length && /[A-Za-z0-9_.]/.test(text[i])) {
        value += text[i];
        i += 1;
      }
      tokens.push({ kind: 'id', value });
    } else {
      throw new DotReadError(`unexpected character ${JSON.stringify(ch)}`);
    }
  }
  return tokens;
}

/** "Name: (description)" labels carry structured fields by convention. */
function splitLabel(label: string): { name: string; description: string } {
  const match = /^\s*([^:]+?)\s*:\s*\((.*)\)\s*$/s.exec(label);
  if (match) return { name: match[1], description: match[2] };
  return { name: label, description: '' };
}

export function parseDot(text: string): ViewGraph {
  const tokens = tokenize(text);
  let pos = 0;

  const peek = () => tokens[pos];
  const next = (): Token => {
    const token = tokens[pos];
    if (!token) throw new DotReadError('unexpected end of graph text');
    pos += 1;
    return token;
  };
  const expect = (value: string) => {
    const token = next();
    if (token.value !== value) {
      throw new DotReadError(`expected ${value}, got ${token.value}`);
    }
  };

  const header = next();
  if (header.kind !== 'id' || header.value !== 'digraph') {
    throw new DotReadError('not a digraph');
  }
  if (peek()?.value !== '{') next(); // optional graph name
  expect('{');

  const nodes = new Map<string, ViewNode>();
  const edges: ViewEdge[] = [];
  const groups = new Map<string, Set<string>>();

  const ensureNode = (id: string): ViewNode => {
    let node = nodes.get(id);
    if (!node) {
      node = { id, label: '', name: id, description: '', keyFiles: [] };
      nodes.set(id, node);
    }
    return node;
  };

  const readAttrs = (): Map<string, string> => {
    const attrs = new Map<string, string>();
    expect('[');
    while (peek() && peek().value !== ']') {
      const key = next();
      expect('=');
      const value = next();
      attrs.set(key.value, value.value);
      if (peek()?.value === ',') next();
    }
    expect(']');
    return attrs;
  };

  const applyNodeAttrs = (node: ViewNode, attrs: Map<string, string>) => {
    node.label = attrs.get('label') ?? node.label;
    const fromLabel = splitLabel(node.label || node.id);
    node.name = attrs.get('name') ?? fromLabel.name;
    node.description = attrs.get('description') ?? fromLabel.description;
    const files = attrs.get('keyFiles');
    if (files) {
      node.keyFiles = files.split(';').map((f) => f.trim()).filter(Boolean);
    }
  };

  const statement = (memberSink: Set<string> | null) => {
    const first = next();
    if (first.kind !== 'id') {
      throw new DotReadError(`unexpected token ${first.value}`);
    }
    if (first.value === 'subgraph') {
      const nameToken = next();
      if (!nameToken.value.startsWith('cluster')) {
        throw new DotReadError('only cluster subgraphs are supported');
      }
      expect('{');
      const members = new Set<string>();
      let label = nameToken.value;
      while (peek() && peek().value !== '}') {
        const inner = peek();
        if (inner.kind === 'id' && inner.value === 'label') {
          next();
          expect('=');
          label = next().value;
          if (peek()?.value === ';') next();
        } else {
          statement(members);
        }
      }
      expect('}');
      for (const id of members) ensureNode(id);
      const existing = groups.get(label) ?? new Set<string>();
      for (const id of members) existing.add(id);
      groups.set(label, existing);
      if (peek()?.value === ';') next();
      return;
    }
    if (peek()?.value === '->') {
      next();
      const dst = next();
      let label = '';
      let relation = '';
      if (peek()?.value === '[') {
        const attrs = readAttrs();
        label = attrs.get('label') ?? '';
        relation = attrs.get('relation') ?? '';
      }
      ensureNode(first.value);
      ensureNode(dst.value);
      memberSink?.add(first.value);
      memberSink?.add(dst.value);
      edges.push({ src: first.value, dst: dst.value, label, relation });
    } else {
      const node = ensureNode(first.value);
      memberSink?.add(first.value);
      if (peek()?.value === '[') applyNodeAttrs(node, readAttrs());
    }
    if (peek()?.value === ';') next();
  };

  while (peek() && peek().value !== '}') statement(null);
  expect('}');
  if (pos !== tokens.length) throw new DotReadError('trailing content after graph');
  if (nodes.size === 0) throw new DotReadError('graph has no nodes');
  return { nodes: [...nodes.values()], edges, groups };
}
