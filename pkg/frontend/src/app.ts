/** Top-level rater loop: claim the next page, render the controller for its
 * study kind, submit, repeat. A 204 means the study is finished for this
 * rater; a 403 surfaces the server-side qualification lock. */

import { AnnotationClient, PageModel, StudyLockedError } from "./api.js";
import { AcceptabilityPage } from "./acceptability.js";
import { AbsolutePage } from "./absolute.js";
import { HeadToHeadPage } from "./headtohead.js";
import { clear, el } from "./dom.js";
import { PageTimer } from "./timing.js";

export class AnnotatorApp {
  constructor(
    private readonly root: HTMLElement,
    private readonly api: AnnotationClient,
    private readonly studyId: string,
    private readonly timerFactory: () => PageTimer = () => new PageTimer(),
  ) {}

  /** Serve pages until the study is exhausted for this rater. */
  async start(): Promise<void> {
    for (;;) {
      let page: PageModel | null;
      try {
        page = await this.api.nextPage(this.studyId);
      } catch (error) {
        if (error instanceof StudyLockedError) {
          this.renderLocked(error.message);
          return;
        }
        throw error;
      }
      if (page === null) {
        this.renderDone();
        return;
      }
      await this.servePage(page);
    }
  }

  private servePage(page: PageModel): Promise<void> {
    return new Promise((resolve) => {
      const submit = async (
        responses: { item_id: string; payload: Record<string, unknown> }[],
        elapsedMs: number,
      ) => {
        await this.api.submitJudgments(page.study_id, page.page_id, elapsedMs, responses);
        resolve();
      };
      clear(this.root);
      const controller = this.buildController(page, submit);
      this.root.append(controller.root);
    });
  }

  private buildController(
    page: PageModel,
    submit: (
      responses: { item_id: string; payload: Record<string, unknown> }[],
      elapsedMs: number,
    ) => Promise<void>,
  ): { root: HTMLElement } {
    const timer = this.timerFactory();
    switch (page.kind) {
      case "acceptability":
        return new AcceptabilityPage(page, submit, timer);
      case "head_to_head":
        return new HeadToHeadPage(page, submit, timer);
      case "absolute":
      case "qualification":
        return new AbsolutePage(page, submit, timer);
      default:
        throw new Error(`unknown study kind ${page.kind satisfies never}`);
    }
  }

  private renderDone(): void {
    clear(this.root);
    this.root.append(
      el("div", { class: "done", text: "No more pages in this study. Thank you!" }),
    );
  }

  private renderLocked(detail: string): void {
    clear(this.root);
    this.root.append(
      el("div", { class: "locked" }, [
        el("h3", { text: "Qualification required" }),
        el("p", {
          text:
            "This study needs a qualification you have not passed yet. " +
            "Complete the qualification exam first.",
        }),
        el("p", { class: "detail", text: detail }),
      ]),
    );
  }
}
