#include "agrivqa/cli.hpp"

#include <iostream>

#include <CLI11.hpp>

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/pipeline.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

namespace {

struct CommonFlags {
    std::string config_path;
    std::string dataset_path;
    std::string mock_path;
    int shots = -1;
    std::int64_t seed = -1;
    std::string out_dir = "runs";
    std::string resume_run_id;
    std::string strategy;
    int limit = 0;
};

void add_run_flags(CLI::App* cmd, CommonFlags& flags, bool with_dataset) {
    cmd->add_option("--config", flags.config_path, "pipeline config file")->required();
    if (with_dataset) cmd->add_option("--dataset", flags.dataset_path, "dataset manifest");
    cmd->add_option("--mock", flags.mock_path, "mock script overriding all mock endpoints");
    cmd->add_option("--shots", flags.shots, "few-shot exemplar count (0-5)");
    cmd->add_option("--seed", flags.seed, "run seed");
    cmd->add_option("--out", flags.out_dir, "runs root directory");
    cmd->add_option("--resume", flags.resume_run_id, "resume an interrupted run id");
    cmd->add_option("--strategy", flags.strategy,
                    "strategy tag (baseline | caption[+Kshot][+judge])");
    cmd->add_option("--limit", flags.limit, "process at most N items (0 = all)");
}

RunOptions to_options(const CommonFlags& flags) {
    RunOptions opt;
    opt.dataset_path = flags.dataset_path;
    opt.strategy_text = flags.strategy;
    opt.limit = flags.limit;
    if (flags.seed >= 0) opt.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.shots >= 0) opt.shots = flags.shots;
    opt.out_root = flags.out_dir;
    opt.resume_run_id = flags.resume_run_id;
    if (!flags.mock_path.empty()) opt.mock_override = flags.mock_path;
    return opt;
}

PipelineConfig load_for_run(const CommonFlags& flags, const RunOptions& opt) {
    PipelineConfig cfg = load_config(flags.config_path);
    cfg = apply_overrides(cfg, opt);
    const auto errors = validate_config(cfg);
    if (!errors.empty()) {
        std::string joined;
        for (const auto& e : errors) {
            if (!joined.empty()) joined += "; ";
            joined += e;
        }
        throw config_error("InvalidConfig", joined);
    }
    return cfg;
}

void print_run_result(const RunResult& result) {
    std::cout << "run_id=" << result.run_id << "\n";
    std::cout << "run_dir=" << result.run_dir.string() << "\n";
    if (!result.completed) {
        std::cout << "status=partial (resume with --resume " << result.run_id << ")\n";
        return;
    }
    std::cout << "status=complete\n";
    std::cout << "metrics=" << (result.run_dir / "metrics.json").string() << "\n";
    const auto& m = result.metrics;
    if (m.contains("classification") && !m.at("classification").is_null()) {
        std::cout << "crop_accuracy=" << m.at("classification").at("crop_accuracy").get<std::string>()
                  << "\n";
        std::cout << "disease_accuracy="
                  << m.at("classification").at("disease_accuracy").get<std::string>() << "\n";
    }
    if (m.contains("qa") && !m.at("qa").is_null()) {
        std::cout << "qa_score=" << m.at("qa").at("mean_normalized").get<std::string>() << "\n";
    }
    if (m.contains("cells")) {
        std::cout << "cells=" << m.at("cells").size() << "\n";
    }
}

ImageRecord cli_image_record(Pipeline& pipeline, const std::string& image_path,
                             const std::string& question, TaskKind task) {
    ImageRecord record;
    record.id = "cli";
    record.image_ref = pipeline.images().add_file(image_path);
    record.query = question;
    record.task = task;
    return record;
}

int cmd_validate(const CommonFlags& flags) {
    PipelineConfig cfg = load_config(flags.config_path);
    const auto errors = validate_config(cfg);
    if (errors.empty()) {
        std::cout << "config ok: " << flags.config_path << "\n";
        return 0;
    }
    for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
    return 2;
}

int cmd_caption(const CommonFlags& flags, const std::string& image_path) {
    const RunOptions opt = to_options(flags);
    const PipelineConfig cfg = load_for_run(flags, opt);
    Pipeline pipeline(cfg, {}, nullptr);
    ImageRecord record = cli_image_record(pipeline, image_path, "", TaskKind::DiseaseDiagnosis);
    Captioner captioner = pipeline.make_captioner(cfg.captioner, cfg.caption_judge);
    const CaptionTrace trace = captioner.produce(record);
    nlohmann::json j = trace;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_answer(const CommonFlags& flags, const std::string& image_path,
               const std::string& question, const std::string& task_name) {
    const RunOptions opt = to_options(flags);
    const PipelineConfig cfg = load_for_run(flags, opt);
    const TaskKind task = task_kind_from_name(task_name);
    Pipeline pipeline(cfg, {}, nullptr);
    ImageRecord record = cli_image_record(pipeline, image_path, question, task);

    Captioner captioner = pipeline.make_captioner(cfg.captioner, cfg.caption_judge);
    const CaptionTrace trace = captioner.produce(record);

    VqaEngine vqa = pipeline.make_vqa(cfg.vqa);
    std::vector<Exemplar> exemplars;
    if (cfg.shot_count > 0) {
        exemplars = assemble_few_shot(pipeline.exemplar_pool(), cfg.shot_count, cfg.seed);
    }
    VqaInput input{record, trace.final_caption(), question, task};
    RenderedPrompt prompt =
        vqa.build_task_prompt(input, exemplars, vqa.template_for(task, true), true);
    const AnswerPair pair = vqa.generate_dual_answers(prompt);
    nlohmann::json j{{"caption", trace.final_caption().text},
                     {"caption_converged", trace.final_caption().converged},
                     {"pair", pair}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_judge(const CommonFlags& flags, const std::string& question,
              const std::string& answer_1, const std::string& answer_2,
              const std::string& caption, const std::string& reference,
              const std::string& task_name) {
    const RunOptions opt = to_options(flags);
    const PipelineConfig cfg = load_for_run(flags, opt);
    const TaskKind task = task_kind_from_name(task_name);
    Pipeline pipeline(cfg, {}, nullptr);

    AnswerPair pair;
    pair.answer_1 = answer_1;
    pair.answer_2 = answer_2;
    pair.prompt_fingerprint = content_hash_parts({question, answer_1, answer_2});
    ReferenceAnswer ref;
    if (!reference.empty()) ref = ReferenceAnswer{reference, true};

    AnswerJudge judge = pipeline.make_answer_judge(cfg.answer_judge);
    const std::uint64_t order_seed = cfg.seed;
    const AnswerJudgment judgment =
        judge.judge_pair(pair, ref, rubric_for(task), JudgeContext{question, caption},
                         order_seed);
    nlohmann::json j = judgment;
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Agricultural visual question answering pipeline and evaluation harness"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string image_path, question, answer_1, answer_2, caption_text, reference_text;
    std::string task_name = "disease_diagnosis";
    std::string report_dir;

    auto* validate = app.add_subcommand("validate", "check a config file");
    validate->add_option("--config", flags.config_path, "pipeline config file")->required();

    auto* caption = app.add_subcommand("caption", "caption one image");
    add_run_flags(caption, flags, false);
    caption->add_option("--image", image_path, "image file")->required();

    auto* answer = app.add_subcommand("answer", "caption + dual-answer one image");
    add_run_flags(answer, flags, false);
    answer->add_option("--image", image_path, "image file")->required();
    answer->add_option("--question", question, "the query")->required();
    answer->add_option("--task", task_name, "disease_diagnosis | knowledge_qa");

    auto* judge = app.add_subcommand("judge", "rubric-judge an answer pair");
    add_run_flags(judge, flags, false);
    judge->add_option("--question", question, "the query")->required();
    judge->add_option("--answer1", answer_1, "first candidate")->required();
    judge->add_option("--answer2", answer_2, "second candidate")->required();
    judge->add_option("--caption", caption_text, "caption context");
    judge->add_option("--reference", reference_text, "reference answer");
    judge->add_option("--task", task_name, "disease_diagnosis | knowledge_qa");

    auto* evaluate = app.add_subcommand("evaluate", "run a dataset through the pipeline");
    add_run_flags(evaluate, flags, true);

    auto* ablate = app.add_subcommand("ablate", "run the config's ablation grid");
    add_run_flags(ablate, flags, true);

    auto* report = app.add_subcommand("report", "print a completed run's summary");
    report->add_option("run_dir", report_dir, "run directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: [UnknownCommand] " << e.what() << "\n";
        return 2;
    }

    try {
        if (validate->parsed()) return cmd_validate(flags);
        if (caption->parsed()) return cmd_caption(flags, image_path);
        if (answer->parsed()) return cmd_answer(flags, image_path, question, task_name);
        if (judge->parsed()) {
            return cmd_judge(flags, question, answer_1, answer_2, caption_text, reference_text,
                             task_name);
        }
        if (evaluate->parsed()) {
            const RunOptions opt = to_options(flags);
            const PipelineConfig cfg = load_for_run(flags, opt);
            print_run_result(run_evaluate(cfg, opt));
            return 0;
        }
        if (ablate->parsed()) {
            const RunOptions opt = to_options(flags);
            const PipelineConfig cfg = load_for_run(flags, opt);
            print_run_result(run_ablate(cfg, opt));
            return 0;
        }
        if (report->parsed()) {
            std::cout << render_run_report(report_dir);
            return 0;
        }
        std::cerr << "error: [UnknownCommand] no subcommand\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: [Internal] " << e.what() << "\n";
        return 5;
    }
}

}  // namespace agrivqa
