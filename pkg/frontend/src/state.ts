/**
 * Revision bookkeeping: rendered content must come from a single server
 * revision, stale responses are dropped, and at most one mutation request is
 * in flight per session.
 */

export class RevisionGate {
  private displayed = -1;

  /** Accept a response revision; false means the response is stale. */
  accept(revision: number): boolean {
    if (revision < this.displayed) return false;
    this.displayed = revision;
    return true;
  }

  current(): number {
    return this.displayed;
  }
}

type Job<T> = () => Promise<T>;

/** Serializes mutations: each enqueued job starts after the previous settles. */
export class MutationQueue {
  private tail: Promise<unknown> = Promise.resolve();
  private pending = 0;

  enqueue<T>(job: Job<T>): Promise<T> {
    this.pending += 1;
    const run = this.tail.then(job).finally(() => {
      this.pending -= 1;
    });
    this.tail = run.catch(() => undefined);
    return run;
  }

  get inFlight(): number {
    return this.pending;
  }
}
