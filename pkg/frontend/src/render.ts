/** Plain-DOM rendering of the view-models. All interaction goes back through
 * the models and the API client; nothing here holds state of its own. */

import type { ConversationItem, ConversationModel } from "./conversation.js";
import type { ConfirmationController } from "./confirm.js";
import type { SchemaBrowserModel } from "./schema.js";

export function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: Array<Node | string> = [],
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function renderTable(
  model: ConversationModel,
  item: ConversationItem,
  rerender: () => void,
): HTMLElement {
  const table = item.table;
  if (!table) return el("div");
  const head = el("tr", {}, table.columns.map((c) => el("th", {}, [c])));
  const body = model
    .pageOf(item)
    .map((row) =>
      el("tr", {}, row.map((cell) => el("td", {}, [cell === null ? "NULL" : String(cell)]))),
    );
  const wrapper = el("div", { class: "result-table" }, [
    el("table", {}, [el("thead", {}, [head]), el("tbody", {}, body)]),
  ]);
  if (table.rows.length > table.pageSize) {
    const back = el("button", { type: "button" }, ["prev"]);
    back.addEventListener("click", () => {
      model.pageBack(item.seq);
      rerender();
    });
    const forward = el("button", { type: "button" }, ["next"]);
    forward.addEventListener("click", () => {
      model.pageForward(item.seq);
      rerender();
    });
    const label = `${table.cursor + 1}-${Math.min(
      table.cursor + table.pageSize,
      table.rows.length,
    )} of ${table.rows.length}${table.truncated ? " (truncated)" : ""}`;
    wrapper.append(el("div", { class: "pager" }, [back, el("span", {}, [label]), forward]));
  } else if (table.truncated) {
    wrapper.append(el("div", { class: "pager" }, ["(result truncated)"]));
  }
  return wrapper;
}

function renderItem(
  model: ConversationModel,
  item: ConversationItem,
  rerender: () => void,
): HTMLElement {
  const classes = ["item", `item-${item.type}`];
  if (item.isError) classes.push("item-error");
  const node = el("div", { class: classes.join(" "), "data-seq": String(item.seq) });
  node.append(el("span", { class: "seq" }, [`#${item.seq}`]));

  if (item.type === "reasoning") {
    const toggle = el("button", { type: "button", class: "reasoning-toggle" }, [
      item.collapsed ? "show reasoning step" : "hide reasoning step",
    ]);
    toggle.addEventListener("click", () => {
      model.toggleReasoning(item.seq);
      rerender();
    });
    node.append(toggle);
    if (!item.collapsed) node.append(el("div", { class: "reasoning" }, [item.text]));
    return node;
  }

  if (item.plan) {
    node.append(el("div", { class: "plan-title" }, ["Proposed plan"]));
    node.append(
      el(
        "ol",
        {},
        item.plan.steps.map((s) => el("li", {}, [s.description])),
      ),
    );
    for (const warning of item.plan.warnings) {
      node.append(el("div", { class: "warning" }, [`! ${warning}`]));
    }
    return node;
  }

  if (item.text) node.append(el("div", { class: "text" }, [item.text]));
  if (item.table) node.append(renderTable(model, item, rerender));
  return node;
}

export function renderConversation(
  model: ConversationModel,
  container: HTMLElement,
  rerender: () => void,
): void {
  container.replaceChildren(
    ...model.visibleItems().map((item) => renderItem(model, item, rerender)),
  );
  container.scrollTop = container.scrollHeight;
}

export function renderModal(
  controller: ConfirmationController,
  container: HTMLElement,
  afterAction: () => void,
): void {
  const modal = controller.currentModal();
  if (!modal) {
    container.replaceChildren();
    container.classList.add("hidden");
    return;
  }
  container.classList.remove("hidden");
  const box = el("div", { class: "modal-box" });
  box.append(
    el("h3", {}, [
      modal.totalStages > 1
        ? `Confirmation ${modal.stage} of ${modal.totalStages}`
        : "Confirmation required",
    ]),
  );
  box.append(
    el(
      "ol",
      {},
      modal.steps.map((s) => el("li", {}, [s.description])),
    ),
  );
  for (const warning of modal.warnings) {
    box.append(el("div", { class: "warning" }, [`! ${warning}`]));
  }
  box.append(el("p", {}, [modal.prompt]));
  const confirm = el("button", { type: "button", class: "confirm" }, ["Confirm"]);
  confirm.addEventListener("click", () => {
    void controller.confirm().then(afterAction);
  });
  const cancel = el("button", { type: "button", class: "cancel" }, ["Cancel"]);
  cancel.addEventListener("click", () => {
    void controller.cancel().then(afterAction);
  });
  box.append(el("div", { class: "modal-actions" }, [cancel, confirm]));
  container.replaceChildren(box);
}

export function renderSchema(
  model: SchemaBrowserModel,
  container: HTMLElement,
  rerender: () => void,
): void {
  container.replaceChildren();
  const empty = model.emptyMessage();
  if (empty) {
    container.append(el("div", { class: "empty-state" }, [empty]));
    return;
  }
  for (const name of model.tableNames()) {
    const entry = el("div", {
      class: `schema-table${model.focused === name ? " focused" : ""}`,
    });
    const header = el("button", { type: "button", class: "schema-name" }, [name]);
    header.addEventListener("click", () => {
      model.toggle(name);
      rerender();
    });
    entry.append(header);
    if (model.isExpanded(name)) {
      const table = model.table(name);
      if (table) {
        entry.append(
          el(
            "ul",
            { class: "columns" },
            table.columns.map((c) =>
              el("li", {}, [
                `${c.name} ${c.declared_type}${c.is_primary_key ? " PK" : ""}${
                  c.nullable ? "" : " NOT NULL"
                }`,
              ]),
            ),
          ),
        );
        for (const link of model.fkLinks(name)) {
          const anchor = el("button", { type: "button", class: "fk-link" }, [
            `FK (${link.fromColumns.join(", ")}) → ${link.toTable}(${link.toColumns.join(", ")})`,
          ]);
          if (link.navigable) {
            anchor.addEventListener("click", () => {
              model.navigateTo(link.toTable);
              rerender();
            });
          } else {
            anchor.setAttribute("disabled", "disabled");
          }
          entry.append(anchor);
        }
      }
    }
    container.append(entry);
  }
}

export function renderInspector(
  events: Array<{ seq: number; type: string; body: unknown }>,
  container: HTMLElement,
): void {
  container.replaceChildren(
    ...events.map((event) =>
      el("details", { class: "inspector-event" }, [
        el("summary", {}, [`#${event.seq} ${event.type}`]),
        el("pre", {}, [JSON.stringify(event.body, null, 2)]),
      ]),
    ),
  );
}
