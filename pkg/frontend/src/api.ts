import type {
  FramesPayload,
  JobStatus,
  ObjectSpecDoc,
  RunStarted,
  SceneSnapshot,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Server refused the request (4xx/5xx with an error body). */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

/** The request never reached the server (offline, refused, aborted). */
export class ConnectionError extends Error {
  constructor(cause: unknown) {
    super(cause instanceof Error ? cause.message : String(cause));
    this.name = 'ConnectionError';
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let code = 'http-error';
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { error?: { code?: string; message?: string } };
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, code, message);
}

/**
 * Typed client for one scene of the stylization service.
 *
 * Every method maps to a single HTTP call; the server owns all state and
 * all geometry. `fetchImpl` is injectable so tests can run without a network.
 */
export class SceneClient {
  private readonly base: string;

  constructor(
    baseUrl: string,
    public readonly sceneId: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {
    this.base = `${baseUrl.replace(/\/+$/, '')}/scenes/${encodeURIComponent(sceneId)}`;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.base}${path}`, init);
    } catch (err) {
      throw new ConnectionError(err);
    }
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return response;
  }

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  /** GET /scenes/{id} */
  snapshot(): Promise<SceneSnapshot> {
    return this.requestJson<SceneSnapshot>('');
  }

  /** GET /scenes/{id}/frames */
  frames(): Promise<FramesPayload> {
    return this.requestJson<FramesPayload>('/frames');
  }

  /** POST /scenes/{id}/objects — returns the server's echo of the spec. */
  async placeObject(spec: ObjectSpecDoc): Promise<ObjectSpecDoc> {
    const body = await this.requestJson<{ object: ObjectSpecDoc }>('/objects', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(spec),
    });
    return body.object;
  }

  /** DELETE /scenes/{id}/objects/{name} */
  async removeObject(name: string): Promise<void> {
    await this.request(`/objects/${encodeURIComponent(name)}`, { method: 'DELETE' });
  }

  /** POST /scenes/{id}/run */
  startRun(): Promise<RunStarted> {
    return this.requestJson<RunStarted>('/run', { method: 'POST' });
  }

  /** GET /scenes/{id}/jobs/current */
  jobStatus(): Promise<JobStatus> {
    return this.requestJson<JobStatus>('/jobs/current');
  }

  previewUrl(view: number, layer: 'raw' | 'composite'): string {
    return `${this.base}/preview?view=${view}&layer=${layer}`;
  }

  /** GET /scenes/{id}/preview — PNG bytes for one frame, before or after. */
  async preview(view: number, layer: 'raw' | 'composite'): Promise<Uint8Array> {
    const response = await this.request(`/preview?view=${view}&layer=${layer}`);
    return new Uint8Array(await response.arrayBuffer());
  }

  /** GET /scenes/{id}/report — timing table as CSV text. */
  async report(): Promise<string> {
    const response = await this.request('/report');
    return await response.text();
  }
}
