/**
 * DOM rendering for the rating form.
 *
 * The document (abstract plus collapsible claims) and the summary sit side
 * by side above four radio-group Likert scales. Radios, not sliders: the
 * scale is integer by construction. Submit stays disabled until every
 * dimension has a selection.
 */

import { DimensionSpec, Progress, RatingScores, TaskPayload } from "./types.js";

export interface ViewRefs {
  status: HTMLElement;
  error: HTMLElement;
  taskHost: HTMLElement;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderShell(root: HTMLElement): ViewRefs {
  root.replaceChildren();
  const status = el("div", "status");
  status.setAttribute("role", "status");
  const error = el("div", "error-banner");
  error.hidden = true;
  const taskHost = el("main", "task-host");
  root.append(status, error, taskHost);
  return { status, error, taskHost };
}

export function showError(refs: ViewRefs, message: string): void {
  refs.error.hidden = false;
  refs.error.textContent = message;
}

export function clearError(refs: ViewRefs): void {
  refs.error.hidden = true;
  refs.error.textContent = "";
}

export function showStatus(refs: ViewRefs, message: string): void {
  refs.status.textContent = message;
}

function renderDimension(spec: DimensionSpec, onChange: () => void): HTMLFieldSetElement {
  const fieldset = el("fieldset", "dimension");
  fieldset.dataset.dimension = spec.name;
  const legend = el("legend", undefined, spec.name.charAt(0).toUpperCase() + spec.name.slice(1));
  fieldset.append(legend);
  for (const step of spec.scale) {
    const label = el("label", "scale-option");
    const input = el("input");
    input.type = "radio";
    input.name = `rating-${spec.name}`;
    input.value = String(step.value);
    input.addEventListener("change", onChange);
    label.append(input, el("span", undefined, `${step.value} - ${step.anchor}`));
    fieldset.append(label);
  }
  return fieldset;
}

function selectedScores(form: HTMLFormElement, dimensions: DimensionSpec[]): Partial<RatingScores> {
  const scores: Partial<RatingScores> = {};
  for (const spec of dimensions) {
    const checked = form.querySelector<HTMLInputElement>(`input[name="rating-${spec.name}"]:checked`);
    if (checked) {
      (scores as Record<string, number>)[spec.name] = Number(checked.value);
    }
  }
  return scores;
}

/**
 * Render one task. `onSubmit` is awaited; while it runs the form is locked,
 * and if it rejects the form unlocks for correction (no silent drops).
 */
export function renderTask(
  refs: ViewRefs,
  task: TaskPayload,
  onSubmit: (scores: Partial<RatingScores>) => Promise<void>,
): void {
  clearError(refs);
  showStatus(refs, `Task ${task.progress.done + 1} of ${task.progress.total}`);

  const container = el("div", "task");

  const instructions = el("details", "instructions");
  const instrLabel = el("summary", undefined, "Rating instructions");
  const instrBody = el("pre", "instructions-text", task.instructions);
  instructions.append(instrLabel, instrBody);
  instructions.open = true;

  const panes = el("div", "panes");
  const docPane = el("section", "document-pane");
  docPane.append(el("h2", undefined, task.document.title))
  const abstractBlock = el("section", "abstract");
  abstractBlock.append(el("h3", undefined, "Abstract"), el("p", undefined, task.document.abstract));
  const claimsBlock = el("details", "claims");
  claimsBlock.open = true;
  const claimsLabel = el("summary", undefined, "Claims");
  claimsBlock.append(claimsLabel, el("p", undefined, task.document.claims));
  docPane.append(abstractBlock, claimsBlock);

  const summaryPane = el("section", "summary-pane");
  summaryPane.append(el("h3", undefined, "Summary to rate"), el("p", undefined, task.summary_text));
  panes.append(docPane, summaryPane);

  const form = el("form", "rating-form");
  form.dataset.taskId = task.task_id;
  const submit = el("button", "submit", "Submit ratings");
  submit.type = "submit";
  submit.disabled = true;

  const refresh = () => {
    const chosen = selectedScores(form, task.dimensions);
    submit.disabled = task.dimensions.some((d) => !(d.name in chosen));
  };
  for (const spec of task.dimensions) {
    form.append(renderDimension(spec, refresh));
  }
  form.append(submit);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const scores = selectedScores(form, task.dimensions);
    submit.disabled = true;
    onSubmit(scores)
      .catch((error: unknown) => {
        // Server rejected or network gave out: surface it and let the
        // rater fix or retry; the selection is preserved.
        showError(refs, error instanceof Error ? error.message : String(error));
      })
      .finally(refresh);
  });

  container.append(instructions, panes, form);
  refs.taskHost.replaceChildren(container);
}

export function renderCompletion(refs: ViewRefs, progress: Progress | null): void {
  clearError(refs);
  const done = progress ? `All ${progress.total} tasks are done.` : "All tasks are done.";
  showStatus(refs, "Session complete");
  const panel = el("div", "completion");
  panel.append(el("h2", undefined, "Thank you!"), el("p", undefined, `${done} You can close this window.`));
  refs.taskHost.replaceChildren(panel);
}
