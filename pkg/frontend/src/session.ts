import { ApiClient, ApiError, NoTasksError } from './api.js';
import { Choice, TaskPayload } from './types.js';

/** What the controller needs from the page; app.ts binds it to the DOM and
 * tests bind it to a recorder. Captions are always passed through exactly as
 * the server sent them — ordering and content are the server's authority. */
export interface SessionView {
  showTask(task: TaskPayload): void;
  showDone(): void;
  showError(message: string, retriable: boolean): void;
  clearError(): void;
  clearSelection(): void;
  setSubmitEnabled(enabled: boolean): void;
}

export class TaskController {
  current: TaskPayload | null = null;
  selected: Choice | null = null;
  private pending = false;

  constructor(
    private readonly api: ApiClient,
    private readonly raterId: string,
    private readonly view: SessionView,
  ) {}

  /** Fetch and render the next task; completion and network failures land in
   * the view as the done screen or a retry banner. */
  async advance(): Promise<void> {
    this.current = null;
    this.selected = null;
    this.view.clearSelection();
    this.view.setSubmitEnabled(false);
    try {
      this.current = await this.api.fetchTask(this.raterId);
    } catch (err) {
      if (err instanceof NoTasksError) {
        this.view.showDone();
        return;
      }
      this.view.showError('Could not reach the study server.', true);
      return;
    }
    this.view.clearError();
    this.view.showTask(this.current);
  }

  select(choice: Choice): void {
    if (this.current === null || this.pending) return;
    this.selected = choice;
    this.view.setSubmitEnabled(true);
  }

  /** Submit the current selection: exactly one vote POST per submit action.
   * Duplicate/closed conflicts skip forward; other client errors keep the
   * selection so the rater can retry. */
  async submit(): Promise<void> {
    if (this.current === null || this.selected === null || this.pending) return;
    this.pending = true;
    this.view.setSubmitEnabled(false);
    try {
      await this.api.submitVote(this.current.task_id, this.raterId, this.selected);
    } catch (err) {
      if (err instanceof ApiError && (err.code === 'duplicate_vote' || err.code === 'task_closed')) {
        this.pending = false;
        await this.advance();
        return;
      }
      if (err instanceof ApiError) {
        this.view.showError(`Vote rejected: ${err.code}`, false);
        this.view.setSubmitEnabled(true); // selection preserved, rater may retry
      } else {
        this.view.showError('Could not reach the study server.', true);
        this.view.setSubmitEnabled(true);
      }
      this.pending = false;
      return;
    }
    this.pending = false;
    await this.advance();
  }
}
