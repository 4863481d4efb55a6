import { ExplorerApp, WorkbenchApi } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8737";

const api = new WorkbenchApi(base);
const app = new ExplorerApp(document, api);

function buildControls(): HTMLElement {
  const bar = document.createElement("div");
  bar.className = "controls";

  const actions: Array<["keep" | "merge_into_parent" | "split_into_children", string]> = [
    ["keep", "Keep"],
    ["merge_into_parent", "Merge into parent"],
    ["split_into_children", "Split"],
  ];
  const rationale = document.createElement("input");
  rationale.placeholder = "rationale";
  bar.appendChild(rationale);

  for (const [action, label] of actions) {
    const button = document.createElement("button");
    button.textContent = label;
    button.addEventListener("click", () => {
      const node = app.vm?.selectedNode;
      if (node == null) return;
      void app.decide(node, action, rationale.value);
      rationale.value = "";
    });
    bar.appendChild(button);
  }

  const retry = document.createElement("button");
  retry.textContent = "Retry unsynced";
  retry.addEventListener("click", () => void app.retryQueued());
  bar.appendChild(retry);
  return bar;
}

document.body.appendChild(app.root);
app.root.insertBefore(buildControls(), app.chart);

app.load()
  .then(() => app.refreshDecisionLog())
  .catch((err) => {
    const msg = document.createElement("div");
    msg.className = "banner";
    msg.textContent = `cannot reach the workbench at ${base}: ${String(err)}`;
    document.body.prepend(msg);
  });
