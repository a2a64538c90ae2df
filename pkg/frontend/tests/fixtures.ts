/** Shared fixture payloads shaped like real map-service responses. */

import { vi } from 'vitest';

export const GLOBAL_DOT = `digraph G {
  "Auth" [label="Auth: (handles login)", keyFiles="src/auth.py"];
  "Store" [label="Store: (persists data)", keyFiles="src/store.py"];
  "Auth" -> "Store" [label="saves users"];
  subgraph cluster_0 {
    label="AuthModule";
    "Auth";
  }
}
`;

export const LOCAL_DOT = `digraph L {
  "login" -> "check_password" [label="defines", relation="defines"];
}
`;

export const OVERVIEW = {
  summary: 'A tiny auth service.',
  entryPoint: 'src/main.py',
  howToRun: 'python src/main.py',
  modules: [
    { name: 'AuthModule', description: 'Login handling.', components: ['Auth'] },
  ],
  architectureGuide: [
    { stepNumber: 1, text: 'Start at the entry point.', moduleName: '' },
    { stepNumber: 2, text: 'Follow login into Auth.', moduleName: 'AuthModule' },
  ],
};

export function globalPayload(dot: string = GLOBAL_DOT) {
  return {
    sessionId: 'sess-1',
    kind: 'business-component',
    graphDot: dot,
    overview: OVERVIEW,
    trace: { stoppedBecause: 'stabilized', iterations: [] },
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/** Install a fetch stub serving canned routes and recording every call. */
export function fakeServer(overrides: Record<string, unknown> = {}) {
  const requests: RecordedRequest[] = [];
  const routes: Record<string, unknown> = {
    'GET /sessions/sess-1/maps/business': globalPayload(),
    'GET /sessions/sess-1/maps/function-call': globalPayload(),
    'GET /sessions/sess-1/maps/business/nodes/Auth/local': {
      nodeId: 'Auth',
      graphDot: LOCAL_DOT,
      explanation: 'Auth defines the login flow.',
    },
    'POST /sessions/sess-1/chat': {
      question: 'q',
      selectedNodeId: 'Auth',
      answer: 'It checks passwords.',
      timestamp: 0,
    },
    'GET /sessions/sess-1/chat': [],
    ...overrides,
  };

  const fetchStub = vi.fn(async (url: string, init?: RequestInit) => {
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    requests.push({ url, method, body });
    const route = routes[`${method} ${url}`];
    if (route === undefined) {
      return {
        ok: false,
        status: 404,
        json: async () => ({ code: 'not-found', message: `no route ${method} ${url}` }),
      };
    }
    return { ok: true, status: 200, json: async () => route };
  });
  vi.stubGlobal('fetch', fetchStub);
  return { requests, routes };
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
