// Browser bootstrap: wires the session runner to the DOM. The participant
// token arrives as ?pid=...; everything else lives on the server.

import { Choice, StudyApi, TrialPayload } from "./api.js";
import { SessionRunner, TrialPresenter } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function loadImage(img: HTMLImageElement, url: string): Promise<boolean> {
  return new Promise((resolve) => {
    img.onload = () => resolve(true);
    img.onerror = () => resolve(false);
    img.src = url;
  });
}

class DomPresenter implements TrialPresenter {
  private leftImg = el<HTMLImageElement>("left-image");
  private rightImg = el<HTMLImageElement>("right-image");
  private leftBtn = el<HTMLButtonElement>("choose-left");
  private rightBtn = el<HTMLButtonElement>("choose-right");
  private progress = el<HTMLElement>("progress");
  private notice = el<HTMLElement>("notice");
  private trialScreen = el<HTMLElement>("trial-screen");
  private doneScreen = el<HTMLElement>("done-screen");
  private pendingChoice: ((c: Choice) => void) | null = null;

  constructor() {
    this.leftBtn.addEventListener("click", () => this.choose("left"));
    this.rightBtn.addEventListener("click", () => this.choose("right"));
    document.addEventListener("keydown", (ev) => {
      if (ev.key === "ArrowLeft") this.choose("left");
      if (ev.key === "ArrowRight") this.choose("right");
    });
  }

  private choose(c: Choice) {
    if (!this.pendingChoice) return; // ignored until images are ready
    const resolve = this.pendingChoice;
    this.pendingChoice = null;
    this.setEnabled(false);
    resolve(c);
  }

  private setEnabled(on: boolean) {
    this.leftBtn.disabled = !on;
    this.rightBtn.disabled = !on;
  }

  async presentTrial(trial: TrialPayload): Promise<"ready" | "load-failed"> {
    this.setEnabled(false);
    this.notice.textContent = "";
    this.progress.textContent = `Trial ${trial.index + 1} of ${trial.total}`;
    const cacheBust = Date.now();
    const [leftOk, rightOk] = await Promise.all([
      loadImage(this.leftImg, `${trial.left_image}?v=${cacheBust}`),
      loadImage(this.rightImg, `${trial.right_image}?v=${cacheBust}`),
    ]);
    if (!leftOk || !rightOk) return "load-failed";
    // choices open only now, so response time excludes loading
    this.setEnabled(true);
    return "ready";
  }

  awaitChoice(): Promise<Choice> {
    return new Promise((resolve) => {
      this.pendingChoice = resolve;
    });
  }

  reportLoadFailure(trial: TrialPayload, attempt: number): void {
    this.notice.textContent =
      `An image failed to load (attempt ${attempt}). The problem was reported; retrying...`;
    console.error("image load failure", trial.trial_id, attempt);
  }

  showCompletion(completed: number): void {
    this.trialScreen.hidden = true;
    this.doneScreen.hidden = false;
    el<HTMLElement>("done-count").textContent = String(completed);
  }
}

async function start() {
  const pid = new URLSearchParams(window.location.search).get("pid");
  const instructions = el<HTMLElement>("instructions");
  const trialScreen = el<HTMLElement>("trial-screen");
  if (!pid) {
    instructions.textContent = "Missing participant token (?pid=...).";
    return;
  }
  el<HTMLButtonElement>("start-button").addEventListener(
    "click",
    () => {
      instructions.hidden = true;
      trialScreen.hidden = false;
      const api = new StudyApi("");
      const runner = new SessionRunner(api, new DomPresenter());
      runner.run(pid).catch((err) => {
        el<HTMLElement>("notice").textContent = `Session error: ${err}`;
      });
    },
    { once: true },
  );
}

start();
