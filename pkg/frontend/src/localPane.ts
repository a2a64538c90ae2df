/**
 * Local understanding pane: opens on node click, fetches the node's local
 * map, and renders it with a legend of the five member relations.
 */

import type { ApiClient, MapKind } from './api.js';
import { renderGraph } from './graphView.js';

export const LOCAL_RELATIONS = [
  'inheritance',
  'implements',
  'defines',
  'used-by',
  'contains',
] as const;

export interface LocalPane {
  element: HTMLElement;
  open(nodeId: string): Promise<void>;
  close(): void;
}

export function createLocalPane(
  api: ApiClient,
  sessionId: string,
  kind: () => MapKind,
): LocalPane {
  const pane = document.createElement('section');
  pane.className = 'local-pane';
  pane.hidden = true;

  const title = document.createElement('h2');
  title.className = 'local-pane-title';
  const body = document.createElement('div');
  body.className = 'local-pane-body';

  const legend = document.createElement('ul');
  legend.className = 'relation-legend';
  for (const relation of LOCAL_RELATIONS) {
    const item = document.createElement('li');
    item.className = `legend-${relation}`;
    item.textContent = relation;
    legend.appendChild(item);
  }

  const closeButton = document.createElement('button');
  closeButton.className = 'local-pane-close';
  closeButton.textContent = 'Close';
  pane.append(closeButton, title, legend, body);

  const load = async (nodeId: string) => {
    body.replaceChildren();
    const spinner = document.createElement('div');
    spinner.className = 'spinner';
    spinner.textContent = 'Generating local map…';
    body.appendChild(spinner);
    try {
      const payload = await api.getLocalMap(sessionId, kind(), nodeId);
      body.replaceChildren(renderGraph(payload.graphDot, () => undefined).element);
      if (payload.explanation) {
        const explanation = document.createElement('p');
        explanation.className = 'local-explanation';
        explanation.textContent = payload.explanation;
        body.appendChild(explanation);
      }
    } catch (error) {
      const message = document.createElement('p');
      message.className = 'local-error';
      message.textContent = `Local map failed: ${(error as Error).message}`;
      const retry = document.createElement('button');
      retry.className = 'local-retry';
      retry.textContent = 'Retry';
      retry.addEventListener('click', () => void load(nodeId));
      body.replaceChildren(message, retry);
    }
  };

  const api_ = {
    element: pane,
    async open(nodeId: string) {
      pane.hidden = false;
      title.textContent = nodeId;
      await load(nodeId);
    },
    close() {
      pane.hidden = true;
      body.replaceChildren();
    },
  };
  closeButton.addEventListener('click', () => api_.close());
  return api_;
}
