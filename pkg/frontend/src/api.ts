import { Choice, Results, TaskPayload, VoteAck } from './types.js';

export class NoTasksError extends Error {
  constructor() {
    super('no open tasks for this rater');
  }
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
  ) {
    super(`API error ${status}: ${code}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin client over the study service; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async parseError(response: Response): Promise<never> {
    let code = 'unknown';
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) code = body.error;
    } catch {
      // non-JSON error body; keep "unknown"
    }
    if (response.status === 404 && code === 'no_tasks') {
      throw new NoTasksError();
    }
    throw new ApiError(response.status, code);
  }

  async fetchTask(raterId: string): Promise<TaskPayload> {
    const url = `${this.baseUrl}/api/task?rater=${encodeURIComponent(raterId)}`;
    const response = await this.fetchFn(url);
    if (!response.ok) await this.parseError(response);
    return (await response.json()) as TaskPayload;
  }

  async submitVote(taskId: string, raterId: string, choice: Choice): Promise<VoteAck> {
    const response = await this.fetchFn(`${this.baseUrl}/api/vote`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ task_id: taskId, rater_id: raterId, choice }),
    });
    if (!response.ok) await this.parseError(response);
    return (await response.json()) as VoteAck;
  }

  async results(): Promise<Results> {
    const response = await this.fetchFn(`${this.baseUrl}/api/results`);
    if (!response.ok) await this.parseError(response);
    return (await response.json()) as Results;
  }
}
