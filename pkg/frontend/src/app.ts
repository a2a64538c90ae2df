/**
 * Application shell: map-kind tabs, graph + overview, local pane, chat.
 *
 * The flow mirrors how a reader works through an unfamiliar codebase:
 * global map and guided overview first, then a click on any node opens
 * its local map, and chat questions are scoped to that node.
 */

import { ApiClient, type MapKind } from './api.js';
import { createChatPanel } from './chatPanel.js';
import { renderGraph, type GraphView } from './graphView.js';
import { createLocalPane } from './localPane.js';
import { renderOverview } from './overviewPanel.js';
import {
  initialState,
  selectNode,
  setGuideStep,
  switchKind,
  type ViewState,
} from './state.js';

const TABS: { kind: MapKind; label: string }[] = [
  { kind: 'business', label: 'Business Components' },
  { kind: 'function-call', label: 'Function Calls' },
];

export async function mountApp(
  root: HTMLElement,
  sessionId: string,
  api: ApiClient = new ApiClient(),
): Promise<{ state: () => ViewState }> {
  let state = initialState(sessionId);

  root.replaceChildren();
  const tabBar = document.createElement('nav');
  tabBar.className = 'tab-bar';
  const mapArea = document.createElement('main');
  mapArea.className = 'map-area';
  const sidebar = document.createElement('div');
  sidebar.className = 'sidebar';
  root.append(tabBar, mapArea, sidebar);

  const chat = createChatPanel(api, sessionId);
  const localPane = createLocalPane(api, sessionId, () => state.activeKind);

  let graphView: GraphView | null = null;

  const onNodeClick = (nodeId: string) => {
    state = selectNode(state, nodeId);
    graphView?.markSelected(nodeId);
    chat.setSelectedNode(nodeId);
    void localPane.open(nodeId);
  };

  const showKind = async (kind: MapKind) => {
    state = switchKind(state, kind);
    chat.setSelectedNode(null);
    localPane.close();
    for (const button of tabBar.querySelectorAll('button')) {
      button.classList.toggle('active', button.dataset.kind === kind);
    }
    mapArea.replaceChildren();
    sidebar.replaceChildren();
    const loading = document.createElement('p');
    loading.className = 'map-loading';
    loading.textContent = 'Loading map…';
    mapArea.appendChild(loading);
    try {
      const payload = await api.getGlobalMap(sessionId, kind);
      graphView = renderGraph(payload.graphDot, onNodeClick);
      mapArea.replaceChildren(graphView.element);
      const overview = renderOverview(payload.overview, (index, moduleName) => {
        state = setGuideStep(
          state, index, payload.overview?.architectureGuide.length ?? 0,
        );
        graphView?.highlightGroup(moduleName || null);
      });
      sidebar.append(overview.element, localPane.element, chat.element);
    } catch (error) {
      const failure = document.createElement('p');
      failure.className = 'map-error';
      failure.textContent = `Map failed to load: ${(error as Error).message}`;
      mapArea.replaceChildren(failure);
      sidebar.append(localPane.element, chat.element);
    }
  };

  for (const tab of TABS) {
    const button = document.createElement('button');
    button.className = 'tab';
    button.dataset.kind = tab.kind;
    button.textContent = tab.label;
    button.addEventListener('click', () => void showKind(tab.kind));
    tabBar.appendChild(button);
  }

  await showKind(state.activeKind);
  await chat.loadHistory().catch(() => undefined);

  return { state: () => state };
}
