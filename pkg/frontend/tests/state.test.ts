import { describe, expect, it } from 'vitest';

import {
  closePane,
  initialState,
  selectNode,
  setGuideStep,
  switchKind,
} from '../src/state.js';

describe('view state invariants', () => {
  it('paneOpen implies a selected node', () => {
    let state = initialState('s');
    expect(state.paneOpen).toBe(false);
    state = selectNode(state, 'Auth');
    expect(state.paneOpen && state.selectedNodeId !== null).toBe(true);
    state = closePane(state);
    expect(state.paneOpen).toBe(false);
    expect(state.selectedNodeId).toBeNull();
  });

  it('guide step index stays in range', () => {
    let state = initialState('s');
    state = setGuideStep(state, 2, 3);
    expect(state.guideStepIndex).toBe(2);
    expect(setGuideStep(state, 5, 3).guideStepIndex).toBe(2);
    expect(setGuideStep(state, -1, 3).guideStepIndex).toBe(2);
  });

  it('tab switch drops the selection', () => {
    let state = selectNode(initialState('s'), 'Auth');
    state = switchKind(state, 'function-call');
    expect(state.selectedNodeId).toBeNull();
    expect(state.paneOpen).toBe(false);
    expect(state.activeKind).toBe('function-call');
  });
});
