import type {
  NextStimulus,
  ResponseAck,
  ResponseBody,
  SessionInfo,
  SessionParams,
} from './types.js';

export interface TrialApi {
  createSession(params: SessionParams): Promise<SessionInfo>;
  nextStimulus(sessionId: string): Promise<NextStimulus>;
  recordResponse(sessionId: string, body: ResponseBody): Promise<ResponseAck>;
  fetchImage(imageUrl: string): Promise<Blob>;
  exportCsv(sessionId: string): Promise<string>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = typeof body.detail === 'string' ? body.detail : JSON.stringify(body);
    } catch {
      // keep statusText
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

/** fetch-backed client; baseUrl '' talks to the page's own origin. */
export class HttpTrialApi implements TrialApi {
  constructor(private readonly baseUrl: string = '') {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async createSession(params: SessionParams): Promise<SessionInfo> {
    const response = await fetch(this.url('/sessions'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(params),
    });
    return parseOrThrow<SessionInfo>(response);
  }

  async nextStimulus(sessionId: string): Promise<NextStimulus> {
    const response = await fetch(this.url(`/sessions/${sessionId}/next`));
    return parseOrThrow<NextStimulus>(response);
  }

  async recordResponse(sessionId: string, body: ResponseBody): Promise<ResponseAck> {
    const response = await fetch(this.url(`/sessions/${sessionId}/responses`), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    return parseOrThrow<ResponseAck>(response);
  }

  async fetchImage(imageUrl: string): Promise<Blob> {
    const response = await fetch(this.url(imageUrl));
    if (!response.ok) {
      throw new ApiError(response.status, `image fetch failed: ${response.status}`);
    }
    return response.blob();
  }

  async exportCsv(sessionId: string): Promise<string> {
    const response = await fetch(this.url(`/export?session=${encodeURIComponent(sessionId)}`));
    if (!response.ok) {
      throw new ApiError(response.status, `export failed: ${response.status}`);
    }
    return response.text();
  }
}
