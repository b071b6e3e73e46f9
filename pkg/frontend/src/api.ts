/** Typed client for the annotation service. The browser talks only to these
 * endpoints; raters identify with the X-Annotator-Id header. */

export type StudyKind = "acceptability" | "head_to_head" | "absolute" | "qualification";
export type FlowMode = "mcqa" | "nli";

export interface PageItem {
  item_id: string;
  context?: string;
  gold_label?: string;
  explanation?: string;
  left_text?: string;
  right_text?: string;
  [key: string]: unknown;
}

export interface PageModel {
  study_id: string;
  page_id: string;
  kind: StudyKind;
  flow_mode: FlowMode;
  items: PageItem[];
}

export interface ItemResponse {
  item_id: string;
  payload: Record<string, unknown>;
}

export class StudyLockedError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "StudyLockedError";
  }
}

export class SubmitError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "SubmitError";
  }
}

/** What the app needs from the service; AnnotationApi is the HTTP one. */
export interface AnnotationClient {
  nextPage(studyId: string): Promise<PageModel | null>;
  submitJudgments(
    studyId: string,
    pageId: string,
    elapsedMs: number,
    responses: ItemResponse[],
  ): Promise<string[]>;
}

export class AnnotationApi implements AnnotationClient {
  constructor(
    private readonly baseUrl: string,
    private readonly annotatorId: string,
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private headers(): Record<string, string> {
    return {
      "Content-Type": "application/json",
      "X-Annotator-Id": this.annotatorId,
    };
  }

  /** Claim the next page; null when the study has nothing pending. A 403
   * means the rater lacks the study's qualification (lock state). */
  async nextPage(studyId: string): Promise<PageModel | null> {
    const response = await this.fetchFn(
      `${this.baseUrl}/studies/${encodeURIComponent(studyId)}/next`,
      { headers: this.headers() },
    );
    if (response.status === 204) return null;
    if (response.status === 403) {
      const body = await response.json().catch(() => ({ detail: "locked" }));
      throw new StudyLockedError(String(body.detail ?? "locked"));
    }
    if (!response.ok) throw new SubmitError(`next page failed: HTTP ${response.status}`);
    return (await response.json()) as PageModel;
  }

  /** Submit a whole page at once; every response shares one elapsed time. */
  async submitJudgments(
    studyId: string,
    pageId: string,
    elapsedMs: number,
    responses: ItemResponse[],
  ): Promise<string[]> {
    const response = await this.fetchFn(`${this.baseUrl}/judgments`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({
        study_id: studyId,
        page_id: pageId,
        elapsed_ms: elapsedMs,
        responses,
      }),
    });
    if (!response.ok) {
      const body = await response.json().catch(() => ({ detail: response.status }));
      throw new SubmitError(`submit failed: ${body.detail ?? response.status}`);
    }
    const body = (await response.json()) as { judgment_ids: string[] };
    return body.judgment_ids;
  }
}
