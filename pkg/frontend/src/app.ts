import { ApiClient } from './api.js';
import { getRaterId } from './raterId.js';
import { SessionView, TaskController } from './session.js';
import { Choice, TaskPayload } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing element #${id}`);
  return element as T;
}

class DomView implements SessionView {
  private readonly image = el<HTMLImageElement>('task-image');
  private readonly caption1 = el<HTMLDivElement>('caption-1-text');
  private readonly caption2 = el<HTMLDivElement>('caption-2-text');
  private readonly instruction = el<HTMLParagraphElement>('instruction');
  private readonly taskScreen = el<HTMLDivElement>('task-screen');
  private readonly doneScreen = el<HTMLDivElement>('done-screen');
  private readonly errorBanner = el<HTMLDivElement>('error-banner');
  private readonly errorText = el<HTMLSpanElement>('error-text');
  private readonly retryButton = el<HTMLButtonElement>('retry');
  private readonly submitButton = el<HTMLButtonElement>('submit');

  showTask(task: TaskPayload): void {
    this.taskScreen.hidden = false;
    this.doneScreen.hidden = true;
    this.instruction.textContent = task.instruction;
    // Captions render exactly as received; panels scroll rather than truncate.
    this.caption1.textContent = task.caption_1;
    this.caption2.textContent = task.caption_2;
    if (task.image.startsWith('http://') || task.image.startsWith('https://')) {
      this.image.src = task.image;
    } else {
      this.image.src = `/images/${task.image}`;
    }
  }

  showDone(): void {
    this.taskScreen.hidden = true;
    this.doneScreen.hidden = false;
    this.errorBanner.hidden = true;
  }

  showError(message: string, retriable: boolean): void {
    this.errorBanner.hidden = false;
    this.errorText.textContent = message;
    this.retryButton.hidden = !retriable;
  }

  clearError(): void {
    this.errorBanner.hidden = true;
  }

  clearSelection(): void {
    for (const input of document.querySelectorAll<HTMLInputElement>('input[name="choice"]')) {
      input.checked = false;
    }
  }

  setSubmitEnabled(enabled: boolean): void {
    this.submitButton.disabled = !enabled;
  }
}

function main(): void {
  const raterId = getRaterId(window.localStorage);
  el<HTMLSpanElement>('rater-id').textContent = raterId;
  const view = new DomView();
  const controller = new TaskController(new ApiClient(''), raterId, view);

  for (const input of document.querySelectorAll<HTMLInputElement>('input[name="choice"]')) {
    input.addEventListener('change', () => {
      if (input.checked) controller.select(input.value as Choice);
    });
  }
  el<HTMLButtonElement>('submit').addEventListener('click', () => {
    void controller.submit();
  });
  el<HTMLButtonElement>('retry').addEventListener('click', () => {
    void controller.advance();
  });

  void controller.advance();
}

main();
