/** Typed client for the segmentation service HTTP contract. */

export type Branch = "sam" | "hq" | "corrected";

export interface PointPrompt {
  x: number;
  y: number;
  label: "positive" | "negative";
}

export interface BoxPrompt {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface PromptsPayload {
  points?: PointPrompt[];
  box?: [number, number, number, number];
  coarse_mask_rle?: string;
}

export interface SegmentRequestBody {
  image_id?: string;
  image_png_b64?: string;
  prompts: PromptsPayload;
  return: Branch[];
}

export interface SegmentResponseBody {
  v: number;
  masks: Record<string, string>;
  areas: Record<string, number>;
  iou_scores: number[];
  selected: number;
  biou_vs_gt: number | null;
  latency_ms: number;
}

export interface HealthBody {
  ok: boolean;
  v: number;
  model_config: { image_size: number } & Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...a) => fetch(...a),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) throw new ApiError(resp.status, `GET ${path} -> ${resp.status}`);
    return (await resp.json()) as T;
  }

  health(): Promise<HealthBody> {
    return this.getJson("/health");
  }

  async imageIds(): Promise<string[]> {
    const body = await this.getJson<{ images: string[] }>("/images");
    return body.images;
  }

  imageUrl(id: string): string {
    return `${this.baseUrl}/image/${id}`;
  }

  async segment(body: SegmentRequestBody, signal?: AbortSignal): Promise<SegmentResponseBody> {
    const resp = await this.fetchImpl(`${this.baseUrl}/segment`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, `POST /segment -> ${resp.status}`);
    }
    return (await resp.json()) as SegmentResponseBody;
  }
}
