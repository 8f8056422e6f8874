// Wire types for the human study REST API.

export type Choice = 'first_shown' | 'second_shown';

export interface TaskPayload {
  task_id: string;
  item_id: string;
  image: string;
  caption_1: string;
  caption_2: string;
  instruction: string;
  required_votes: number;
  votes_so_far: number;
}

export interface VoteAck {
  ok: boolean;
  closed: boolean;
}

export interface PairTally {
  ours_preferred: number;
  baseline_preferred: number;
  open_tasks: number;
}

export interface Results {
  pairs: Record<string, PairTally>;
  n_tasks: number;
}
