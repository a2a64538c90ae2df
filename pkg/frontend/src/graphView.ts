/**
 * SVG renderer for global and local maps.
 *
 * Nodes are laid out on a circle (no physics, no external renderer), each
 * one clickable; edges are straight lines with their purpose as a label.
 * When the DOT text cannot be read, the view degrades to a raw-text
 * fallback pane instead of a blank screen.
 */

import { DotReadError, parseDot, type ViewGraph } from './dot.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
const WIDTH = 900;
const HEIGHT = 600;
const NODE_RADIUS = 34;

export interface GraphView {
  element: HTMLElement;
  graph: ViewGraph | null;
  highlightGroup(moduleName: string | null): void;
  markSelected(nodeId: string | null): void;
}

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

function layout(graph: ViewGraph): Map<string, { x: number; y: number }> {
  const positions = new Map<string, { x: number; y: number }>();
  const count = graph.nodes.length;
  const radius = Math.min(WIDTH, HEIGHT) / 2 - NODE_RADIUS - 30;
  graph.nodes.forEach((node, index) => {
    if (count === 1) {
      positions.set(node.id, { x: WIDTH / 2, y: HEIGHT / 2 });
      return;
    }
    const angle = (2 * Math.PI * index) / count - Math.PI / 2;
    positions.set(node.id, {
      x: WIDTH / 2 + radius * Math.cos(angle),
      y: HEIGHT / 2 + radius * Math.sin(angle),
    });
  });
  return positions;
}

function fallbackPane(dotText: string, reason: string): HTMLElement {
  const pane = document.createElement('div');
  pane.className = 'dot-fallback';
  const note = document.createElement('p');
  note.textContent = `Could not render the graph (${reason}); raw output:`;
  const raw = document.createElement('pre');
  raw.className = 'dot-fallback-raw';
  raw.textContent = dotText;
  pane.append(note, raw);
  return pane;
}

export function renderGraph(
  dotText: string,
  onNodeClick: (nodeId: string) => void,
): GraphView {
  const container = document.createElement('div');
  container.className = 'graph-view';

  let graph: ViewGraph | null = null;
  try {
    graph = parseDot(dotText);
  } catch (error) {
    const reason = error instanceof DotReadError ? error.message : String(error);
    container.appendChild(fallbackPane(dotText, reason));
    return {
      element: container,
      graph: null,
      highlightGroup: () => undefined,
      markSelected: () => undefined,
    };
  }

  const svg = svgEl('svg');
  svg.setAttribute('viewBox', `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute('class', 'graph-svg');
  const positions = layout(graph);

  for (const edge of graph.edges) {
    const from = positions.get(edge.src)!;
    const to = positions.get(edge.dst)!;
    const line = svgEl('line');
    line.setAttribute('x1', String(from.x));
    line.setAttribute('y1', String(from.y));
    line.setAttribute('x2', String(to.x));
    line.setAttribute('y2', String(to.y));
    line.setAttribute('class', 'graph-edge');
    svg.appendChild(line);
    if (edge.label) {
      const text = svgEl('text');
      text.setAttribute('x', String((from.x + to.x) / 2));
      text.setAttribute('y', String((from.y + to.y) / 2 - 4));
      text.setAttribute('class', 'graph-edge-label');
      text.textContent = edge.label;
      svg.appendChild(text);
    }
  }

  const nodeElements = new Map<string, SVGGElement>();
  for (const node of graph.nodes) {
    const position = positions.get(node.id)!;
    const group = svgEl('g');
    group.setAttribute('class', 'graph-node');
    group.dataset.nodeId = node.id;
    const circle = svgEl('circle');
    circle.setAttribute('cx', String(position.x));
    circle.setAttribute('cy', String(position.y));
    circle.setAttribute('r', String(NODE_RADIUS));
    const text = svgEl('text');
    text.setAttribute('x', String(position.x));
    text.setAttribute('y', String(position.y + 4));
    text.setAttribute('text-anchor', 'middle');
    text.textContent = node.name || node.id;
    if (node.description) {
      const title = svgEl('title');
      title.textContent = node.description;
      group.appendChild(title);
    }
    group.append(circle, text);
    group.addEventListener('click', () => onNodeClick(node.id));
    svg.appendChild(group);
    nodeElements.set(node.id, group);
  }

  container.appendChild(svg);
  const frozenGraph = graph;

  return {
    element: container,
    graph,
    highlightGroup(moduleName) {
      for (const element of nodeElements.values()) {
        element.classList.remove('module-highlight');
      }
      if (!moduleName) return;
      const members = frozenGraph.groups.get(moduleName);
      if (!members) return;
      for (const id of members) {
        nodeElements.get(id)?.classList.add('module-highlight');
      }
    },
    markSelected(nodeId) {
      for (const element of nodeElements.values()) {
        element.classList.toggle('selected', element.dataset.nodeId === nodeId);
      }
    },
  };
}
