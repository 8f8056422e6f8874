import assert from 'node:assert/strict';
import { test } from 'node:test';

import { ApiClient, ApiError, NoTasksError } from '../src/api.js';

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

const TASK = {
  task_id: 't0',
  item_id: 'img0',
  image: 'img0.png',
  caption_1: 'first shown caption',
  caption_2: 'second shown caption',
  instruction: 'pick the better one',
  required_votes: 3,
  votes_so_far: 0,
};

test('fetchTask hits /api/task with the rater id', async () => {
  const seen: string[] = [];
  const client = new ApiClient('http://host', async (url) => {
    seen.push(url);
    return jsonResponse(200, TASK);
  });
  const task = await client.fetchTask('rater a');
  assert.equal(task.task_id, 't0');
  assert.equal(seen[0], 'http://host/api/task?rater=rater%20a');
});

test('fetchTask maps no_tasks to NoTasksError', async () => {
  const client = new ApiClient('', async () => jsonResponse(404, { error: 'no_tasks' }));
  await assert.rejects(client.fetchTask('r'), NoTasksError);
});

test('submitVote posts the vote body once', async () => {
  const bodies: string[] = [];
  const client = new ApiClient('', async (_url, init) => {
    bodies.push(String(init?.body));
    return jsonResponse(200, { ok: true, closed: false });
  });
  const ack = await client.submitVote('t0', 'r1', 'first_shown');
  assert.equal(ack.closed, false);
  assert.equal(bodies.length, 1);
  assert.deepEqual(JSON.parse(bodies[0]), {
    task_id: 't0',
    rater_id: 'r1',
    choice: 'first_shown',
  });
});

test('submitVote surfaces typed error codes', async () => {
  const client = new ApiClient('', async () => jsonResponse(409, { error: 'duplicate_vote' }));
  await assert.rejects(
    client.submitVote('t0', 'r1', 'first_shown'),
    (err: unknown) => err instanceof ApiError && err.code === 'duplicate_vote' && err.status === 409,
  );
});

test('non-JSON error bodies become code unknown', async () => {
  const client = new ApiClient(
    '',
    async () => new Response('<html>gateway error</html>', { status: 502 }),
  );
  await assert.rejects(
    client.fetchTask('r'),
    (err: unknown) => err instanceof ApiError && err.code === 'unknown',
  );
});
