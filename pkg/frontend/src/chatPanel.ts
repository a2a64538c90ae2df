/**
 * Node-scoped chat. The selected node is picked up from ViewState
 * automatically and shown as a chip on the composer; the server's chat
 * log is the source of truth, so turns survive reloads.
 */

import type { ApiClient, ChatTurn } from './api.js';

export interface ChatPanel {
  element: HTMLElement;
  setSelectedNode(nodeId: string | null): void;
  loadHistory(): Promise<void>;
}

export function createChatPanel(api: ApiClient, sessionId: string): ChatPanel {
  const panel = document.createElement('section');
  panel.className = 'chat-panel';

  const log = document.createElement('ol');
  log.className = 'chat-log';

  const composer = document.createElement('form');
  composer.className = 'chat-composer';
  const chip = document.createElement('span');
  chip.className = 'node-chip';
  chip.hidden = true;
  const input = document.createElement('input');
  input.className = 'chat-input';
  input.placeholder = 'Ask about the project or the selected node…';
  const send = document.createElement('button');
  send.type = 'submit';
  send.className = 'chat-send';
  send.textContent = 'Send';
  send.disabled = true;
  composer.append(chip, input, send);
  panel.append(log, composer);

  let selectedNodeId: string | null = null;

  input.addEventListener('input', () => {
    send.disabled = input.value.trim() === '';
  });

  const appendTurn = (turn: ChatTurn) => {
    const item = document.createElement('li');
    item.className = 'chat-turn';
    const question = document.createElement('p');
    question.className = 'chat-question';
    question.textContent = turn.selectedNodeId
      ? `[${turn.selectedNodeId}] ${turn.question}`
      : turn.question;
    const answer = document.createElement('p');
    answer.className = 'chat-answer';
    answer.textContent = turn.answer;
    item.append(question, answer);
    log.appendChild(item);
  };

  composer.addEventListener('submit', (event) => {
    event.preventDefault();
    const question = input.value.trim();
    if (!question) return;
    send.disabled = true;
    void api
      .sendChat(sessionId, question, selectedNodeId)
      .then((turn) => {
        appendTurn(turn);
        input.value = ''; // cleared only on success; failures keep the draft
      })
      .catch((error: Error) => {
        const notice = document.createElement('li');
        notice.className = 'chat-error';
        notice.textContent = `Send failed: ${error.message}`;
        log.appendChild(notice);
        send.disabled = false;
      });
  });

  return {
    element: panel,
    setSelectedNode(nodeId) {
      selectedNodeId = nodeId;
      chip.hidden = nodeId === null;
      chip.textContent = nodeId ? `scoped to ${nodeId}` : '';
    },
    async loadHistory() {
      const turns = await api.getChatLog(sessionId);
      log.replaceChildren();
      for (const turn of turns) appendTurn(turn);
    },
  };
}
