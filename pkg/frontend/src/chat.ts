/** Chat pane: renders visible turns only and collects the reviewer's messages.

Nothing in this module ever receives trace content; the trace panel is the
sole renderer of hidden material.
*/

import type { VisibleTurn } from "./types.js";

export interface ChatPane {
  element: HTMLElement;
  setTurns(turns: VisibleTurn[]): void;
  setBusy(busy: boolean): void;
  setFinished(finished: boolean): void;
  setSuggestions(texts: string[]): void;
  showNotice(text: string): void;
  clearNotice(): void;
  onSend(handler: (text: string) => void): void;
  onInspect(handler: (tutorTurn: number) => void): void;
}

export function createChatPane(doc: Document): ChatPane {
  const element = doc.createElement("section");
  element.className = "chat-pane";
  element.innerHTML = `
    <ol class="chat-log" data-role="chat-log"></ol>
    <p class="chat-notice" data-role="chat-notice" hidden></p>
    <div class="chat-suggestions" data-role="chat-suggestions"></div>
    <form class="chat-form" data-role="chat-form">
      <input type="text" data-role="chat-input" placeholder="Reply as the student" autocomplete="off">
      <button type="submit" data-role="chat-send">Send</button>
    </form>
    <p class="chat-finished" data-role="chat-finished" hidden>Session finished.</p>
  `;

  const log = element.querySelector<HTMLOListElement>("[data-role=chat-log]")!;
  const notice = element.querySelector<HTMLParagraphElement>("[data-role=chat-notice]")!;
  const suggestions = element.querySelector<HTMLDivElement>("[data-role=chat-suggestions]")!;
  const form = element.querySelector<HTMLFormElement>("[data-role=chat-form]")!;
  const input = element.querySelector<HTMLInputElement>("[data-role=chat-input]")!;
  const send = element.querySelector<HTMLButtonElement>("[data-role=chat-send]")!;
  const finishedBanner = element.querySelector<HTMLParagraphElement>("[data-role=chat-finished]")!;

  let sendHandler: (text: string) => void = () => {};
  let inspectHandler: (tutorTurn: number) => void = () => {};

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    sendHandler(text);
  });

  function setTurns(turns: VisibleTurn[]): void {
    log.textContent = "";
    let tutorOrdinal = 0;
    for (const turn of turns) {
      const item = doc.createElement("li");
      item.className = `chat-turn chat-turn-${turn.speaker.toLowerCase()}`;
      const speaker = doc.createElement("span");
      speaker.className = "chat-speaker";
      speaker.textContent = turn.speaker;
      const text = doc.createElement("span");
      text.className = "chat-text";
      text.textContent = turn.text;
      item.append(speaker, text);
      if (turn.speaker === "Tutorbot") {
        const ordinal = tutorOrdinal;
        const inspect = doc.createElement("button");
        inspect.type = "button";
        inspect.className = "chat-inspect";
        inspect.dataset.role = "inspect-turn";
        inspect.dataset.turn = String(ordinal);
        inspect.textContent = "inspect";
        inspect.addEventListener("click", () => inspectHandler(ordinal));
        item.append(inspect);
        tutorOrdinal += 1;
      }
      log.append(item);
    }
  }

  function setSuggestions(texts: string[]): void {
    suggestions.textContent = "";
    for (const text of texts) {
      const button = doc.createElement("button");
      button.type = "button";
      button.className = "chat-suggestion";
      button.dataset.role = "suggested-turn";
      button.textContent = text;
      button.addEventListener("click", () => {
        input.value = text;
        input.focus();
      });
      suggestions.append(button);
    }
  }

  return {
    element,
    setTurns,
    setSuggestions,
    setBusy(busy) {
      send.disabled = busy;
      input.disabled = busy;
    },
    setFinished(finished) {
      finishedBanner.hidden = !finished;
      form.hidden = finished;
      suggestions.hidden = finished;
    },
    showNotice(text) {
      notice.textContent = text;
      notice.hidden = false;
    },
    clearNotice() {
      notice.textContent = "";
      notice.hidden = true;
    },
    onSend(handler) {
      sendHandler = handler;
    },
    onInspect(handler) {
      inspectHandler = handler;
    },
  };
}
