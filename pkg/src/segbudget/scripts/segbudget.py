""" Length-budgeted reasoning segmentation toolkit.

    Evaluate predictions per difficulty level, annotate benchmark samples
    through a judge model, score single outputs with the length-aware
    reward, and train the toy policy.
"""

import json
import sys

from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from segbudget import config, error
from segbudget.annotate.scoring import annotate_all, level_statistics
from segbudget.annotate.store import dump_annotations, load_annotations
from segbudget.evaluate.protocol import (
    EvalReport,
    ModelProfile,
    evaluate,
    judge_rscores,
    offline_rscores,
)
from segbudget.evaluate.records import load_offline_scores, load_predictions
from segbudget.grpo.core import TrainingLog, baseline_policy, run_toy
from segbudget.io.judge import judge_from_settings, judge_stats
from segbudget.reward.answer import SegReference, parse_output
from segbudget.reward.confidence import ReasoningTrace, uncertainty
from segbudget.reward.engine import LEVELING_MODES, score_output
from segbudget.scripts.base import ScriptBase
from segbudget.seg.mask import Mask
from segbudget.util import fmt


class SegBudgetTool(ScriptBase):
    """Reasoning segmentation under a token budget."""

    def add_options(self):
        super().add_options()
        self.parser.set_defaults(func=None)
        subparsers = self.parser.add_subparsers(dest="command")

        evaluate_parser = subparsers.add_parser(
            "evaluate", help="Compute the per-level evaluation report"
        )
        evaluate_parser.set_defaults(func=self.evaluate)
        evaluate_parser.add_argument("predictions", help="predictions JSONL file")
        evaluate_parser.add_argument("annotations", help="annotations JSONL file")
        evaluate_parser.add_argument(
            "--model-params", type=float, metavar="B", help="model size in billions"
        )
        evaluate_parser.add_argument(
            "--gamma", type=float, help="weight of segmentation accuracy in URSS"
        )
        evaluate_parser.add_argument(
            "--offline-scores",
            metavar="FILE",
            help="precomputed reasoning scores instead of asking the judge",
        )
        self._add_judge_options(evaluate_parser)
        self._add_output_options(evaluate_parser)
        trace_group = evaluate_parser.add_mutually_exclusive_group()
        trace_group.add_argument(
            "--think-only",
            dest="think_only",
            action="store_const",
            const=True,
            help="measure uncertainty over the think span of traces",
        )
        trace_group.add_argument(
            "--full-trace",
            dest="think_only",
            action="store_const",
            const=False,
            help="measure uncertainty over whole traces",
        )

        annotate_parser = subparsers.add_parser(
            "annotate", help="Score difficulty and write reference chains"
        )
        annotate_parser.set_defaults(func=self.annotate)
        annotate_parser.add_argument("annotations", help="samples JSONL file")
        annotate_parser.add_argument(
            "--offline-judge", metavar="FILE", help="canned judge responses (JSONL)"
        )
        annotate_parser.add_argument(
            "--no-chains", action="store_true", help="only score difficulty"
        )
        annotate_parser.add_argument(
            "--output", metavar="FILE", help="write annotations here instead of stdout"
        )
        self._add_judge_options(annotate_parser)

        reward_parser = subparsers.add_parser(
            "reward", help="Score one model output with the length-aware reward"
        )
        reward_parser.set_defaults(func=self.reward)
        text_group = reward_parser.add_mutually_exclusive_group(required=True)
        text_group.add_argument(
            "--output", dest="output_text", help="model output text"
        )
        text_group.add_argument(
            "--output-file", metavar="FILE", help="file holding the model output"
        )
        reward_parser.add_argument(
            "--gt-answer",
            required=True,
            help='ground truth {"Bbox": ..., "Point 1": ...}',
        )
        reward_parser.add_argument("--gt-mask", metavar="RLE", help="ground truth mask")
        reward_parser.add_argument("--pred-mask", metavar="RLE", help="predicted mask")
        reward_parser.add_argument(
            "--image-size", metavar="WxH", help="canvas for box masks"
        )
        reward_parser.add_argument("--tokens", type=int, help="reasoning token count")
        reward_parser.add_argument(
            "--difficulty", type=float, help="difficulty score D"
        )
        uncertainty_group = reward_parser.add_mutually_exclusive_group()
        uncertainty_group.add_argument(
            "--uncertainty", type=float, default=0.0, help="uncertainty U [0]"
        )
        uncertainty_group.add_argument(
            "--trace", metavar="FILE", help="JSON token trace to derive U from"
        )
        reward_parser.add_argument(
            "--no-thinking", action="store_true", help="use the no-thinking reward"
        )
        reward_parser.add_argument(
            "--format", choices=("text", "json"), default="text", help="output format"
        )

        simulate_parser = subparsers.add_parser(
            "simulate", help="Train the toy policy under the length penalty"
        )
        simulate_parser.set_defaults(func=self.simulate)
        simulate_parser.add_argument("--steps", type=int, help="number of updates")
        simulate_parser.add_argument(
            "--seed", type=int, default=0, help="random seed [0]"
        )
        simulate_parser.add_argument(
            "--no-penalty", action="store_true", help="train the unpenalized baseline"
        )
        simulate_parser.add_argument(
            "--log", metavar="FILE", help="write the full training log (JSONL) here"
        )
        simulate_parser.add_argument(
            "--leveling",
            choices=LEVELING_MODES,
            help="signal that assigns budget levels [from settings]",
        )
        simulate_parser.add_argument(
            "--splits", type=int, choices=(2, 3), help="number of budget levels"
        )
        simulate_parser.add_argument(
            "--l-medium", type=float, metavar="TOKENS", help="budget of medium samples"
        )
        self._add_output_options(simulate_parser)

        report_parser = subparsers.add_parser(
            "report", help="Render an evaluation report or a training log"
        )
        report_parser.set_defaults(func=self.report)
        report_parser.add_argument("file", help="report JSON or training log JSONL")
        self._add_output_options(report_parser)

    @staticmethod
    def _add_output_options(parser):
        parser.add_argument(
            "--format", choices=fmt.FORMATS, default="text", help="output format [text]"
        )
        parser.add_argument("-o", "--output", metavar="FILE", help="write to this file")

    @staticmethod
    def _add_judge_options(parser):
        parser.add_argument(
            "--jobs", type=int, default=1, help="parallel judge requests [1]"
        )
        parser.add_argument(
            "--reprompt-on-parse-error",
            action="store_true",
            help="retry once when the judge's scores do not parse",
        )

    def emit(self, text: str, path: Optional[str] = None):
        """Write output to a file or stdout."""
        if path:
            Path(path).write_text(text, encoding="utf-8")
            self.LOG.info("Wrote '%s'", path)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()

    def fail_partially(self, problems: Sequence[str]):
        """Flag a run that had to skip records."""
        if problems:
            self.LOG.warning("%d records skipped or incomplete", len(problems))
            self.return_code = error.EX_DATAERR

    def evaluate(self):
        """Handle the evaluate subcommand."""
        profile = self._profile()
        policy = config.budget_policy()
        think_only = self.args.think_only
        if think_only is None:
            think_only = bool(config.settings.EVAL.THINK_ONLY)

        samples, problems = load_annotations(self.args.annotations)
        annotations = {i.sample_id: i for i in samples}
        predictions, load_problems = load_predictions(self.args.predictions, think_only)
        problems.extend(load_problems)

        if self.args.offline_scores:
            scores, score_problems = load_offline_scores(self.args.offline_scores)
            problems.extend(score_problems)
            rscores = offline_rscores(scores, annotations, policy)
        else:
            judge = judge_from_settings()
            try:
                rscores, judge_problems = judge_rscores(
                    predictions,
                    annotations,
                    judge,
                    jobs=self.args.jobs,
                    reprompt=self.args.reprompt_on_parse_error,
                    policy=policy,
                )
            finally:
                judge.close()
            self.LOG.info("Judge: %s", judge_stats())
            if predictions and not rscores:
                raise error.JudgeError("The judge did not score a single prediction")
            problems.extend(judge_problems)

        report, eval_problems = evaluate(
            predictions,
            annotations,
            profile,
            rscores,
            skipped=len(load_problems),
            policy=policy,
        )
        problems.extend(eval_problems)
        text = fmt.render_report(report.as_dict(), self.args.format)
        self.emit(text, self.args.output)
        self.fail_partially(problems)

    def _profile(self) -> ModelProfile:
        default = config.model_profile()
        params = self.args.model_params
        gamma = self.args.gamma
        try:
            return ModelProfile(
                params=default.params if params is None else params,
                gamma=default.gamma if gamma is None else gamma,
            )
        except error.ValidationError as exc:
            raise error.UserError(str(exc)) from exc

    def annotate(self):
        """Handle the annotate subcommand."""
        samples, problems = load_annotations(self.args.annotations)
        judge = judge_from_settings(self.args.offline_judge)
        try:
            annotated, failures = annotate_all(
                samples,
                judge,
                config.budget_policy(),
                chains=not self.args.no_chains,
                reprompt=self.args.reprompt_on_parse_error,
                jobs=self.args.jobs,
            )
        finally:
            judge.close()
        self.LOG.info("Judge: %s", judge_stats())
        if samples and not annotated:
            raise error.JudgeError(f"No sample could be annotated ({failures[0]})")

        counts = level_statistics(annotated)
        self.LOG.info(
            "Levels: %s", ", ".join(f"{k.label}={v}" for k, v in counts.items())
        )
        self.emit(dump_annotations(annotated), self.args.output)
        self.fail_partially(problems + failures)

    def reward(self):
        """Handle the reward subcommand."""
        if self.args.output_file:
            text = Path(self.args.output_file).read_text(encoding="utf-8")
        else:
            text = self.args.output_text
        try:
            gt = SegReference.from_dict(json.loads(self.args.gt_answer))
        except (ValueError, AttributeError) as exc:
            raise error.UserError(f"Bad --gt-answer: {exc}") from exc
        weights = config.reward_weights()
        if self.args.no_thinking:
            weights = replace(weights, thinking=False)

        U = self.args.uncertainty
        if self.args.trace:
            record = json.loads(Path(self.args.trace).read_text(encoding="utf-8"))
            U = uncertainty(ReasoningTrace.from_record(record))

        parsed_answer = _answer_of(text, weights.thinking)
        width, height = self._canvas(gt, parsed_answer)
        gt_mask = (
            Mask.from_rle(self.args.gt_mask)
            if self.args.gt_mask
            else Mask.from_box(width, height, gt.bbox)
        )
        if self.args.pred_mask:
            pred_mask: Optional[Mask] = Mask.from_rle(self.args.pred_mask)
        elif parsed_answer is not None:
            pred_mask = Mask.from_box(width, height, parsed_answer.bbox)
        else:
            pred_mask = None

        breakdown = score_output(
            text,
            pred_mask,
            gt,
            gt_mask,
            self.args.tokens,
            self.args.difficulty,
            U,
            config.budget_policy(),
            weights,
        )
        result = breakdown.as_dict()
        if self.args.format == "json":
            self.emit(fmt.fmt_json(result))
        else:
            lines = [f"{key} = {_plain(val)}\n" for key, val in result.items()]
            self.emit("".join(lines))

    def _canvas(self, gt: SegReference, answer: Optional[SegReference]):
        if self.args.image_size:
            try:
                size = self.args.image_size.lower().split("x")
                width, height = (int(i) for i in size)
            except ValueError as exc:
                raise error.UserError(
                    f"Bad --image-size {self.args.image_size!r}"
                ) from exc
            return width, height
        if self.args.gt_mask:
            mask = Mask.from_rle(self.args.gt_mask)
            return mask.width, mask.height
        boxes = [gt.bbox] + ([answer.bbox] if answer is not None else [])
        return max(i.x2 for i in boxes) + 1, max(i.y2 for i in boxes) + 1

    def simulate(self):
        """Handle the simulate subcommand."""
        budget = config.budget_policy()
        scheme = {
            key: value
            for key, value in (
                ("leveling", self.args.leveling),
                ("splits", self.args.splits),
                ("l_medium", self.args.l_medium),
            )
            if value is not None
        }
        try:
            budget = replace(budget, **scheme)
        except error.ConfigurationError as exc:
            raise error.UserError(str(exc)) from exc
        if self.args.no_penalty:
            budget = baseline_policy(budget)
        steps = self.args.steps or int(config.settings.TOY.STEPS)
        trainlog = run_toy(config.toy_config(), budget, steps, self.args.seed)
        if self.args.log:
            Path(self.args.log).write_text(trainlog.to_jsonl(), encoding="utf-8")
            self.LOG.info("Wrote training log to '%s'", self.args.log)
        self.emit(fmt.render_log(trainlog.summary, self.args.format), self.args.output)

    def report(self):
        """Handle the report subcommand."""
        text = Path(self.args.file).read_text(encoding="utf-8")
        data = _load_report(text)
        if "rows" in data:
            report = EvalReport.from_dict(data)
            text = fmt.render_report(report.as_dict(), self.args.format)
            self.emit(text, self.args.output)
        else:
            self.emit(fmt.render_log(data, self.args.format), self.args.output)

    def mainloop(self):
        if self.args.func is None:
            self.parser.print_help()
            self.return_code = error.EX_USAGE
            return
        self.args.func()


def _answer_of(text: str, thinking: bool) -> Optional[SegReference]:
    return parse_output(text, thinking=thinking).answer


def _plain(value):
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return "none" if value is None else value


def _load_report(text: str) -> Dict:
    """Evaluation report JSON, training summary JSON, or training log JSONL."""
    try:
        data = json.loads(text)
    except ValueError:
        data = None
    if isinstance(data, dict) and ("rows" in data or "levels" in data):
        return data
    try:
        summary = TrainingLog.from_jsonl(text.splitlines()).summary
    except ValueError as exc:
        raise error.DataError(f"Neither a report nor a training log ({exc})") from exc
    if "levels" not in summary:
        raise error.DataError("Training log has no summary record")
    return dict(summary)


def cli(argv: Optional[List[str]] = None) -> int:
    """Run the tool with the given arguments; returns the exit code."""
    ScriptBase.setup()
    try:
        return SegBudgetTool().run(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else error.EX_USAGE


def run():  # pragma: no cover
    """The entry point."""
    sys.exit(cli())


if __name__ == "__main__":
    run()
