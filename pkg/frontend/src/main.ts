/** Application wiring: one session tab with a streaming conversation view,
 * confirmation modals, a schema browser, and a raw trajectory inspector. */

import { ApiClient } from "./api.js";
import { ConfirmationController } from "./confirm.js";
import { ConversationModel } from "./conversation.js";
import {
  renderConversation,
  renderInspector,
  renderModal,
  renderSchema,
} from "./render.js";
import { SchemaBrowserModel } from "./schema.js";
import { ResumableStream } from "./stream.js";
import type { AgentEvent } from "./types.js";

interface Ui {
  conversation: HTMLElement;
  modal: HTMLElement;
  schema: HTMLElement;
  inspector: HTMLElement;
  status: HTMLElement;
  input: HTMLInputElement;
  form: HTMLFormElement;
  connectForm: HTMLFormElement;
  serverInput: HTMLInputElement;
  dbSelect: HTMLSelectElement;
  reasoningToggle: HTMLInputElement;
}

function grab(): Ui {
  const byId = (id: string) => {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  };
  return {
    conversation: byId("conversation"),
    modal: byId("modal"),
    schema: byId("schema"),
    inspector: byId("inspector"),
    status: byId("status"),
    input: byId("message") as HTMLInputElement,
    form: byId("composer") as HTMLFormElement,
    connectForm: byId("connect") as HTMLFormElement,
    serverInput: byId("server") as HTMLInputElement,
    dbSelect: byId("db") as HTMLSelectElement,
    reasoningToggle: byId("show-reasoning") as HTMLInputElement,
  };
}

class App {
  private api: ApiClient | null = null;
  private sessionId = "";
  private readonly model = new ConversationModel();
  private controller: ConfirmationController | null = null;
  private stream: ResumableStream | null = null;
  private readonly events: AgentEvent[] = [];

  constructor(private readonly ui: Ui) {}

  private setStatus(text: string): void {
    this.ui.status.textContent = text;
  }

  private rerender = (): void => {
    renderConversation(this.model, this.ui.conversation, this.rerender);
    if (this.controller) {
      renderModal(this.controller, this.ui.modal, () => {
        void this.followTurn();
      });
    }
    renderInspector(this.events, this.ui.inspector);
  };

  async loadDatabases(): Promise<void> {
    const api = new ApiClient(this.ui.serverInput.value.replace(/\/$/, ""));
    const databases = await api.listDatabases();
    this.ui.dbSelect.replaceChildren(
      ...databases.map((db) => {
        const option = document.createElement("option");
        option.value = db.name;
        option.textContent = `${db.name} (${db.tables.length} tables)`;
        return option;
      }),
    );
  }

  async connect(): Promise<void> {
    this.api = new ApiClient(this.ui.serverInput.value.replace(/\/$/, ""));
    const descriptor = await this.api.createSession(this.ui.dbSelect.value);
    this.sessionId = descriptor.session_id;
    this.controller = new ConfirmationController((text) =>
      this.postAndFollow(text),
    );
    this.stream = new ResumableStream(this.api, this.sessionId, (event) => {
      this.events.push(event);
      this.model.ingest(event);
      this.controller?.observe(event);
      this.rerender();
    });
    const schema = await this.api.getSchema(this.sessionId);
    renderSchema(new SchemaBrowserModel(schema), this.ui.schema, () => {
      renderSchema(new SchemaBrowserModel(schema), this.ui.schema, this.rerender);
    });
    this.setStatus(`session ${this.sessionId} on ${descriptor.db_ref}`);
  }

  private async postAndFollow(text: string): Promise<void> {
    if (!this.api || !this.sessionId) throw new Error("not connected");
    await this.api.postMessage(this.sessionId, text);
    await this.followTurn();
  }

  async followTurn(): Promise<void> {
    if (!this.stream) return;
    this.setStatus("working…");
    try {
      await this.stream.follow();
      this.setStatus(`session ${this.sessionId} (last seq ${this.stream.nextSeq - 1})`);
    } catch (err) {
      this.setStatus(`connection lost; will resume from seq ${this.stream.nextSeq}`);
      throw err;
    }
  }

  async send(text: string): Promise<void> {
    await this.postAndFollow(text);
  }

  bind(): void {
    this.ui.connectForm.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.connect().catch((err) => this.setStatus(String(err)));
    });
    this.ui.serverInput.addEventListener("change", () => {
      void this.loadDatabases().catch((err) => this.setStatus(String(err)));
    });
    this.ui.form.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.ui.input.value.trim();
      if (!text) return;
      this.ui.input.value = "";
      void this.send(text).catch((err) => this.setStatus(String(err)));
    });
    this.ui.reasoningToggle.addEventListener("change", () => {
      this.model.showReasoning = this.ui.reasoningToggle.checked;
      this.rerender();
    });
    void this.loadDatabases().catch((err) => this.setStatus(String(err)));
  }
}

export function start(): void {
  const app = new App(grab());
  app.bind();
}

if (typeof document !== "undefined" && document.getElementById("conversation")) {
  start();
}
