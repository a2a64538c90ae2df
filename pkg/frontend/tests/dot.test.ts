import { describe, expect, it } from 'vitest';

import { DotReadError, parseDot } from '../src/dot.js';
import { GLOBAL_DOT } from './fixtures.js';

describe('dot reader', () => {
  it('reads nodes, edges, and clusters from server output', () => {
    const graph = parseDot(GLOBAL_DOT);
    expect(graph.nodes.map((n) => n.id).sort()).toEqual(['Auth', 'Store']);
    const auth = graph.nodes.find((n) => n.id === 'Auth')!;
    expect(auth.name).toBe('Auth');
    expect(auth.description).toBe('handles login');
    expect(auth.keyFiles).toEqual(['src/auth.py']);
    expect(graph.edges).toEqual([
      { src: 'Auth', dst: 'Store', label: 'saves users', relation: '' },
    ]);
    expect([...graph.groups.get('AuthModule')!]).toEqual(['Auth']);
  });

  it('splits the name/description label convention', () => {
    const graph = parseDot('digraph G { A [label="Parser: (reads files)"]; }');
    expect(graph.nodes[0].name).toBe('Parser');
    expect(graph.nodes[0].description).toBe('reads files');
  });

  it('keeps a plain label as the display name', () => {
    const graph = parseDot('digraph G { A [label="just text"]; }');
    expect(graph.nodes[0].name).toBe('just text');
    expect(graph.nodes[0].description).toBe('');
  });

  it('synthesizes endpoints referenced only by edges', () => {
    const graph = parseDot('digraph G { A -> B; }');
    expect(graph.nodes).toHaveLength(2);
  });

  it.each([
    'not dot at all',
    'graph G { A -- B }',
    'digraph G { A -> }',
    'digraph G { }',
    'digraph G { A } trailing',
  ])('rejects %s', (text) => {
    expect(() => parseDot(text)).toThrow(DotReadError);
  });
});
