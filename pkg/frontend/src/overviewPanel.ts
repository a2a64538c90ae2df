/**
 * Overview panel: summary / entry point / how-to-run, module list, and a
 * linear guide stepper with free jumping. Steps that carry a moduleName
 * highlight that module's cluster in the map.
 */

import type { Overview } from './api.js';

export interface OverviewPanel {
  element: HTMLElement;
  setStep(index: number): void;
}

export function renderOverview(
  overview: Overview | null,
  onStepActivated: (index: number, moduleName: string) => void,
): OverviewPanel {
  const panel = document.createElement('aside');
  panel.className = 'overview-panel';

  if (!overview) {
    const empty = document.createElement('p');
    empty.className = 'overview-empty';
    empty.textContent = 'No overview was produced for this map.';
    panel.appendChild(empty);
    return { element: panel, setStep: () => undefined };
  }

  const facts = document.createElement('dl');
  facts.className = 'overview-facts';
  const fact = (term: string, value: string, cls: string) => {
    const dt = document.createElement('dt');
    dt.textContent = term;
    const dd = document.createElement('dd');
    dd.className = cls;
    dd.textContent = value;
    facts.append(dt, dd);
  };
  fact('Summary', overview.summary, 'overview-summary');
  fact('Entry point', overview.entryPoint, 'overview-entry');
  fact('How to run', overview.howToRun, 'overview-run');
  panel.appendChild(facts);

  const moduleList = document.createElement('ul');
  moduleList.className = 'overview-modules';
  for (const module of overview.modules) {
    const item = document.createElement('li');
    item.textContent = `${module.name}: ${module.description}`;
    moduleList.appendChild(item);
  }
  panel.appendChild(moduleList);

  const stepper = document.createElement('ol');
  stepper.className = 'guide-stepper';
  const steps = overview.architectureGuide;
  const items: HTMLLIElement[] = [];
  const hint = document.createElement('p');
  hint.className = 'guide-finished-hint';
  hint.hidden = true;
  hint.textContent = 'Guide complete. Click any node in the map to go deeper.';

  const activate = (index: number) => {
    items.forEach((item, i) => item.classList.toggle('active', i === index));
    hint.hidden = index !== steps.length - 1;
    onStepActivated(index, steps[index].moduleName);
  };

  steps.forEach((step, index) => {
    const item = document.createElement('li');
    item.className = 'guide-step';
    item.dataset.module = step.moduleName;
    item.textContent = step.fileName
      ? `${step.text} (${step.moduleName} / ${step.fileName})`
      : `${step.text} (${step.moduleName})`;
    item.addEventListener('click', () => activate(index));
    stepper.appendChild(item);
    items.push(item);
  });
  panel.append(stepper, hint);
  if (steps.length > 0) activate(0);

  return { element: panel, setStep: activate };
}
