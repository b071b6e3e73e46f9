import { AnnotationApi } from "./api.js";
import { AnnotatorApp } from "./app.js";

function start(): void {
  const annotatorInput = document.getElementById("annotator-id") as HTMLInputElement;
  const studyInput = document.getElementById("study-id") as HTMLInputElement;
  const root = document.getElementById("app");
  if (!annotatorInput.value || !studyInput.value || !root) return;
  const api = new AnnotationApi("", annotatorInput.value.trim());
  void new AnnotatorApp(root, api, studyInput.value.trim()).start();
}

document.getElementById("start-button")?.addEventListener("click", start);
