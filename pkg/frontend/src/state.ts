import type { MapKind } from './api.js';

/**
 * Single source of UI truth; everything else is reconstructable from
 * server responses plus this.
 */
export interface ViewState {
  activeSessionId: string;
  activeKind: MapKind;
  selectedNodeId: string | null;
  guideStepIndex: number;
  paneOpen: boolean;
}

export function initialState(sessionId: string): ViewState {
  return {
    activeSessionId: sessionId,
    activeKind: 'business',
    selectedNodeId: null,
    guideStepIndex: 0,
    paneOpen: false,
  };
}

export function selectNode(state: ViewState, nodeId: string): ViewState {
  return { ...state, selectedNodeId: nodeId, paneOpen: true };
}

export function closePane(state: ViewState): ViewState {
  return { ...state, paneOpen: false, selectedNodeId: null };
}

export function switchKind(state: ViewState, kind: MapKind): ViewState {
  // node selection does not survive a tab switch; the node may not exist there
  return { ...state, activeKind: kind, selectedNodeId: null, paneOpen: false };
}

export function setGuideStep(state: ViewState, index: number, stepCount: number): ViewState {
  if (index < 0 || index >= stepCount) return state;
  return { ...state, guideStepIndex: index };
}
