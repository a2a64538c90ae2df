/**
 * Typed client for the map-service HTTP API. The UI talks to the server
 * through this module only; nothing else issues requests.
 */

export type MapKind = 'business' | 'function-call';

export interface GuideStep {
  stepNumber: number;
  text: string;
  moduleName: string;
  fileName?: string | null;
}

export interface ModuleSummary {
  name: string;
  description: string;
  components: string[];
}

export interface Overview {
  summary: string;
  entryPoint: string;
  howToRun: string;
  modules: ModuleSummary[];
  architectureGuide: GuideStep[];
}

export interface GlobalMapPayload {
  sessionId: string;
  kind: string;
  graphDot: string;
  overview: Overview | null;
  trace: { stoppedBecause: string; iterations: unknown[] };
}

export interface SessionInfo {
  sessionId: string;
  status: string;
  rootLabel: string;
  fileCount: number;
  generatedMaps: string[];
}

export interface LocalMapPayload {
  nodeId: string;
  graphDot: string;
  explanation: string;
}

export interface ChatTurn {
  question: string;
  selectedNodeId: string | null;
  answer: string;
  timestamp: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(
      response.status,
      body?.code ?? 'unknown',
      body?.message ?? `request failed with ${response.status}`,
    );
  }
  return body as T;
}

export class ApiClient {
  constructor(private readonly base: string = '') {}

  getSession(sessionId: string): Promise<SessionInfo> {
    return request(`${this.base}/sessions/${sessionId}`);
  }

  getGlobalMap(sessionId: string, kind: MapKind): Promise<GlobalMapPayload> {
    return request(`${this.base}/sessions/${sessionId}/maps/${kind}`);
  }

  getLocalMap(sessionId: string, kind: MapKind, nodeId: string): Promise<LocalMapPayload> {
    return request(
      `${this.base}/sessions/${sessionId}/maps/${kind}/nodes/${encodeURIComponent(nodeId)}/local`,
    );
  }

  sendChat(
    sessionId: string,
    question: string,
    selectedNodeId: string | null,
  ): Promise<ChatTurn> {
    return request(`${this.base}/sessions/${sessionId}/chat`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ question, selectedNodeId }),
    });
  }

  getChatLog(sessionId: string): Promise<ChatTurn[]> {
    return request(`${this.base}/sessions/${sessionId}/chat`);
  }
}
