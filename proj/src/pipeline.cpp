#include "agrivqa/pipeline.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include "agrivqa/errors.hpp"
#include "agrivqa/hash.hpp"
#include "agrivqa/mock_backend.hpp"
#include "agrivqa/util.hpp"

namespace agrivqa {

namespace {

/// Routes mock endpoints to per-script MockBackend instances (cursor state
/// under the run directory) and remote endpoints to HTTP.
class BackendHub final : public ChatBackend {
public:
    BackendHub(const PipelineConfig* cfg, const ImageStore* images,
               std::filesystem::path state_dir)
        : cfg_(cfg), remote_(images), state_dir_(std::move(state_dir)) {}

    std::string complete(const ChatRequest& request) override {
        if (request.endpoint.kind == EndpointKind::Remote) return remote_.complete(request);
        return mock_for(request.endpoint.script_path)->complete(request);
    }

private:
    std::shared_ptr<MockBackend> mock_for(const std::string& script_path) {
        if (script_path.empty()) {
            throw config_error("NoMockScript", "mock endpoint without a script path");
        }
        const auto resolved = cfg_->resolve(script_path);
        std::lock_guard lock(mutex_);
        auto it = backends_.find(resolved.string());
        if (it == backends_.end()) {
            std::filesystem::path state;
            if (!state_dir_.empty()) {
                state = state_dir_ /
                        ("mock_state_" + content_hash(resolved.string()).substr(0, 8) + ".json");
            }
            it = backends_
                     .emplace(resolved.string(), std::make_shared<MockBackend>(
                                                     load_mock_script(resolved), state))
                     .first;
        }
        return it->second;
    }

    const PipelineConfig* cfg_;
    RemoteBackend remote_;
    std::filesystem::path state_dir_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<MockBackend>> backends_;
};

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            {
                std::lock_guard lock(error_mutex);
                if (first_error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const int n = std::min(workers, count);
    threads.reserve(n);
    for (int i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, std::filesystem::path mock_state_dir,
                   TranscriptLog* transcript)
    : cfg_(std::move(cfg)), templates_(load_templates(cfg_)) {
    if (!cfg_.leakage_lexicon_path.empty()) {
        lexicon_ = load_lexicon(cfg_.resolve(cfg_.leakage_lexicon_path));
    }
    if (!cfg_.synonym_table_path.empty()) {
        synonyms_ = SynonymTable::load(cfg_.resolve(cfg_.synonym_table_path));
    }
    hub_ = std::make_shared<BackendHub>(&cfg_, &images_, std::move(mock_state_dir));
    gateway_ = std::make_shared<Gateway>(hub_, cfg_.concurrency_limit, transcript);
}

std::vector<Exemplar>& Pipeline::exemplar_pool() {
    if (!exemplars_) {
        if (cfg_.exemplar_pool_path.empty()) {
            throw config_error("NoExemplarPool",
                               "few-shot prompting needs exemplar_pool_path in the config");
        }
        exemplars_ = load_exemplar_pool(cfg_.resolve(cfg_.exemplar_pool_path), images_);
    }
    return *exemplars_;
}

std::string Pipeline::mock_scripts_digest() const {
    std::vector<std::string> contents;
    std::vector<std::string> seen;
    for (const ModelEndpoint* endpoint :
         {&cfg_.captioner, &cfg_.caption_judge, &cfg_.vqa, &cfg_.answer_judge}) {
        if (endpoint->kind != EndpointKind::Mock || endpoint->script_path.empty()) continue;
        const auto path = cfg_.resolve(endpoint->script_path).string();
        if (std::find(seen.begin(), seen.end(), path) != seen.end()) continue;
        seen.push_back(path);
        if (auto content = try_read_file(path)) contents.push_back(*content);
    }
    for (const auto& list : {cfg_.ablation.caption_sources, cfg_.ablation.models}) {
        for (const auto& endpoint : list) {
            if (endpoint.kind != EndpointKind::Mock || endpoint.script_path.empty()) continue;
            const auto path = cfg_.resolve(endpoint.script_path).string();
            if (std::find(seen.begin(), seen.end(), path) != seen.end()) continue;
            seen.push_back(path);
            if (auto content = try_read_file(path)) contents.push_back(*content);
        }
    }
    return content_hash_parts(contents);
}

Captioner Pipeline::make_captioner(const ModelEndpoint& captioner_endpoint,
                                   const ModelEndpoint& judge_endpoint) {
    return Captioner(*gateway_, templates_, cfg_.caption_threshold, cfg_.max_refinements,
                     captioner_endpoint, judge_endpoint, lexicon());
}

VqaEngine Pipeline::make_vqa(const ModelEndpoint& endpoint) {
    return VqaEngine(*gateway_, templates_, endpoint, cfg_.exemplar_mode);
}

AnswerJudge Pipeline::make_answer_judge(const ModelEndpoint& endpoint) {
    return AnswerJudge(*gateway_, templates_, endpoint);
}

QaJudge Pipeline::make_qa_judge(const ModelEndpoint& endpoint) {
    return QaJudge(*gateway_, templates_, endpoint);
}

PipelineConfig apply_overrides(PipelineConfig cfg, const RunOptions& opt) {
    if (!opt.mock_override.empty()) {
        const std::string script = std::filesystem::absolute(opt.mock_override).string();
        for (ModelEndpoint* endpoint :
             {&cfg.captioner, &cfg.caption_judge, &cfg.vqa, &cfg.answer_judge}) {
            if (endpoint->kind == EndpointKind::Mock) endpoint->script_path = script;
        }
        for (auto* list : {&cfg.ablation.caption_sources, &cfg.ablation.models}) {
            for (auto& endpoint : *list) {
                if (endpoint.kind == EndpointKind::Mock) endpoint.script_path = script;
            }
        }
    }
    if (opt.shots) cfg.shot_count = *opt.shots;
    if (opt.seed) cfg.seed = *opt.seed;
    return cfg;
}

namespace {

struct CellSpec {
    Strategy strategy;
    ModelEndpoint captioner;
    ModelEndpoint caption_judge;
    ModelEndpoint vqa;
    ModelEndpoint answer_judge;
    std::string caption_source_tag;  // "none" for baseline
    std::string model_tag;

    /// items.jsonl partition key; task name is appended per dataset.
    std::string core_tag() const {
        return strategy.tag() + "|" + caption_source_tag + "|" + model_tag;
    }
};

EvalTarget resolve_eval_target(EvalTarget configured, bool use_judge) {
    if (configured != EvalTarget::Auto) return configured;
    return use_judge ? EvalTarget::Selected : EvalTarget::BestOfPair;
}

std::string caption_cache_key(const Pipeline& pipeline, const CellSpec& cell,
                              const ImageRecord& record) {
    const auto& cfg = pipeline.config();
    return cache_key("caption",
                     {record.image_ref, pipeline.templates().caption.digest(),
                      pipeline.templates().caption_refine.digest(),
                      pipeline.templates().caption_judge.digest(), cell.captioner.name(),
                      cell.captioner.decode_params_digest(), cell.caption_judge.name(),
                      cell.caption_judge.decode_params_digest(), cfg.caption_threshold.str(),
                      std::to_string(cfg.max_refinements), record.crop_label,
                      record.disease_label, cfg.leakage_lexicon_path});
}

/// Runs one item through caption -> VQA -> judge -> metric scoring and
/// returns its persisted record.
nlohmann::ordered_json run_item(Pipeline& pipeline, RunStore& store, const CellSpec& cell,
                                const DatasetManifest& dataset, const ImageRecord& record,
                                std::uint64_t seed) {
    const auto& cfg = pipeline.config();
    nlohmann::ordered_json item;
    item["cell"] = cell.core_tag() + "|" + task_kind_name(dataset.task);
    item["id"] = record.id;

    // Caption stage (cached per image/source; shared across strategies).
    Caption caption;
    if (cell.strategy.use_caption) {
        Captioner captioner = pipeline.make_captioner(cell.captioner, cell.caption_judge);
        const std::string key = caption_cache_key(pipeline, cell, record);
        const nlohmann::json trace_json = store.cache("caption").get_or_compute(
            key, [&]() -> nlohmann::json { return captioner.produce(record); });
        const CaptionTrace trace = trace_json.get<CaptionTrace>();
        caption = trace.final_caption();
        item["caption"] = {{"text", caption.text},
                           {"attempt", caption.attempt},
                           {"score", caption.judge_score ? caption.judge_score->str() : ""},
                           {"converged", caption.converged},
                           {"trace_length", trace.entries.size()}};
    } else {
        item["caption"] = nullptr;
    }

    // VQA stage: one completion, two answers.
    VqaEngine vqa = pipeline.make_vqa(cell.vqa);
    std::vector<Exemplar> exemplars;
    if (cell.strategy.shots > 0) {
        exemplars = assemble_few_shot(pipeline.exemplar_pool(), cell.strategy.shots, seed);
    }
    VqaInput input{record, caption, record.query, dataset.task};
    RenderedPrompt prompt =
        vqa.build_task_prompt(input, exemplars,
                              vqa.template_for(dataset.task, cell.strategy.use_caption),
                              cell.strategy.use_caption);
    const std::string answer_key = cache_key(
        "vqa", {record.image_ref, prompt.fingerprint, cell.vqa.name(),
                cell.vqa.decode_params_digest()});
    const nlohmann::json pair_json =
        store.cache("vqa").get_or_compute(answer_key, [&]() -> nlohmann::json {
            return vqa.generate_dual_answers(prompt);
        });
    const AnswerPair pair = pair_json.get<AnswerPair>();
    item["answer_1"] = pair.answer_1;
    item["answer_2"] = pair.answer_2;
    item["degraded"] = pair.degraded;
    item["prompt_fingerprint"] = pair.prompt_fingerprint;

    // Judge stage.
    const ReferenceAnswer& reference =
        cfg.reference_free ? ReferenceAnswer{} : dataset.reference_for(record.id);
    const Rubric& rubric = rubric_for(dataset.task);
    std::optional<AnswerJudgment> judgment;
    if (cell.strategy.use_judge) {
        AnswerJudge judge = pipeline.make_answer_judge(cell.answer_judge);
        const std::uint64_t order_seed =
            std::stoull(content_hash_parts({std::to_string(seed), record.id}).substr(0, 12),
                        nullptr, 16);
        const std::string judge_key = cache_key(
            "answer-judge",
            {pair.answer_1, pair.answer_2, pair.degraded ? "degraded" : "", reference.text,
             reference.from_dataset ? "anchored" : "free", task_kind_name(dataset.task),
             cell.answer_judge.name(), cell.answer_judge.decode_params_digest(),
             std::to_string(order_seed)});
        const nlohmann::json judgment_json =
            store.cache("judgment").get_or_compute(judge_key, [&]() -> nlohmann::json {
                return judge.judge_pair(pair, reference, rubric,
                                        JudgeContext{record.query, caption.text}, order_seed);
            });
        judgment = judgment_json.get<AnswerJudgment>();
        item["judgment"] = judgment_json;
    } else {
        item["judgment"] = nullptr;
    }

    // Metric scoring.
    const EvalTarget target = resolve_eval_target(cfg.eval_target, cell.strategy.use_judge);
    item["eval_target"] = eval_target_name(target);
    auto texts_to_score = [&]() -> std::vector<std::string> {
        switch (target) {
            case EvalTarget::BestOfPair:
                return pair.answer_1 == pair.answer_2
                           ? std::vector<std::string>{pair.answer_1}
                           : std::vector<std::string>{pair.answer_1, pair.answer_2};
            case EvalTarget::Concatenated:
                return {pair.answer_1 + "\n" + pair.answer_2};
            case EvalTarget::Answer1:
                return {pair.answer_1};
            case EvalTarget::Auto:
            case EvalTarget::Selected:
                break;
        }
        if (judgment) {
            return {judgment->selected_index == 1 ? pair.answer_1 : pair.answer_2};
        }
        return {pair.answer_1};
    }();

    if (dataset.task == TaskKind::DiseaseDiagnosis) {
        KeywordMatch combined;
        for (const auto& text : texts_to_score) {
            KeywordMatch m = match_keywords(text, record.crop_label, record.disease_label,
                                            pipeline.synonyms());
            combined.crop_hit = combined.crop_hit || m.crop_hit;
            combined.disease_hit = combined.disease_hit || m.disease_hit;
            for (auto& term : m.matched_terms) {
                if (std::find(combined.matched_terms.begin(), combined.matched_terms.end(),
                              term) == combined.matched_terms.end()) {
                    combined.matched_terms.push_back(term);
                }
            }
        }
        item["crop_hit"] = combined.crop_hit;
        item["disease_hit"] = combined.disease_hit;
        item["matched_terms"] = combined.matched_terms;
        item["qa"] = nullptr;
    } else {
        QaJudge qa_judge = pipeline.make_qa_judge(cell.answer_judge);
        QaItemResult best;
        bool first = true;
        for (const auto& text : texts_to_score) {
            const std::string qa_key =
                cache_key("qa-judge", {text, reference.text, record.query,
                                       cell.answer_judge.name(),
                                       cell.answer_judge.decode_params_digest()});
            const nlohmann::json result_json =
                store.cache("qa_judgment").get_or_compute(qa_key, [&]() -> nlohmann::json {
                    QaDimensions dims;
                    const Score raw =
                        qa_judge.judge_qa_response(text, reference, record.query, &dims);
                    return nlohmann::json{{"usefulness", dims.usefulness},
                                          {"relevance", dims.relevance},
                                          {"accuracy", dims.accuracy},
                                          {"raw", raw}};
                });
            QaItemResult candidate;
            candidate.id = record.id;
            candidate.dimensions = QaDimensions{result_json.at("usefulness").get<Score>(),
                                                result_json.at("relevance").get<Score>(),
                                                result_json.at("accuracy").get<Score>()};
            candidate.raw = result_json.at("raw").get<Score>();
            candidate.normalized = qa_normalized(candidate.raw);
            if (first || candidate.raw > best.raw) best = candidate;
            first = false;
        }
        item["qa"] = {{"usefulness", best.dimensions.usefulness.str()},
                      {"relevance", best.dimensions.relevance.str()},
                      {"accuracy", best.dimensions.accuracy.str()},
                      {"raw", best.raw.str()},
                      {"raw_tenths", best.raw.tenths()},
                      {"normalized", best.normalized}};
        item["crop_hit"] = nullptr;
        item["disease_hit"] = nullptr;
        item["matched_terms"] = nlohmann::json::array();
    }

    // Reference-anchored judging leaks ground truth into selection; keep the
    // mode visible on every record.
    item["reference_mode"] =
        (!cfg.reference_free && reference.from_dataset) ? "reference-anchored" : "reference-free";
    return item;
}

/// Aggregates one cell's persisted records (in dataset order) into metrics.
nlohmann::ordered_json aggregate_cell(const RunStore& store, const std::string& cell_tag,
                                      const DatasetManifest& dataset) {
    std::map<std::string, nlohmann::json> by_id;
    for (const auto& record : store.items_for_cell(cell_tag)) {
        by_id[record.at("id").get<std::string>()] = record;
    }
    std::vector<ItemClassification> classifications;
    std::vector<QaItemResult> qa_items;
    for (const auto& record : dataset.records) {
        auto it = by_id.find(record.id);
        if (it == by_id.end()) {
            throw internal_error("MissingItemRecord",
                                 "no persisted record for item " + record.id);
        }
        const nlohmann::json& item = it->second;
        if (dataset.task == TaskKind::DiseaseDiagnosis) {
            ItemClassification c;
            c.id = record.id;
            c.crop_hit = item.at("crop_hit").get<bool>();
            c.disease_hit = item.at("disease_hit").get<bool>();
            c.matched_terms = item.at("matched_terms").get<std::vector<std::string>>();
            classifications.push_back(std::move(c));
        } else {
            QaItemResult qa;
            qa.id = record.id;
            qa.raw = Score::from_tenths(item.at("qa").at("raw_tenths").get<std::int64_t>());
            qa.normalized = item.at("qa").at("normalized").get<std::int64_t>();
            qa_items.push_back(std::move(qa));
        }
    }
    nlohmann::ordered_json metrics;
    metrics["items"] = dataset.records.size();
    if (dataset.task == TaskKind::DiseaseDiagnosis) {
        const ClassificationResult result = classification_accuracy(std::move(classifications));
        metrics["classification"] = {{"crop_hits", result.crop_hits},
                                     {"disease_hits", result.disease_hits},
                                     {"crop_accuracy", result.crop_accuracy},
                                     {"disease_accuracy", result.disease_accuracy}};
        metrics["qa"] = nullptr;
    } else {
        const QaResult result = aggregate_qa(std::move(qa_items));
        std::int64_t sum = 0;
        for (const auto& qa_item : result.per_item) sum += qa_item.normalized;
        metrics["classification"] = nullptr;
        metrics["qa"] = {{"sum_normalized", sum},
                         {"mean_normalized", result.mean_normalized.str()}};
    }
    return metrics;
}

struct CellExecution {
    int processed = 0;
    int total = 0;
    bool complete() const { return processed >= total; }
};

/// Runs every not-yet-persisted item of one (cell, dataset) pair.
CellExecution execute_cell(Pipeline& pipeline, RunStore& store, const CellSpec& cell,
                           const DatasetManifest& dataset, int limit, std::uint64_t seed) {
    const std::string cell_tag = cell.core_tag() + "|" + task_kind_name(dataset.task);
    const int total = static_cast<int>(dataset.records.size());
    const int n = limit > 0 ? std::min(limit, total) : total;
    if (cell.strategy.shots > 0) pipeline.exemplar_pool();  // load before the workers race

    std::vector<int> pending;
    for (int i = 0; i < n; ++i) {
        if (!store.has_item(cell_tag, dataset.records[i].id)) pending.push_back(i);
    }
    parallel_for(static_cast<int>(pending.size()), pipeline.config().concurrency_limit,
                 [&](int p) {
                     const ImageRecord& record = dataset.records[pending[p]];
                     const auto item = run_item(pipeline, store, cell, dataset, record, seed);
                     store.put_item(cell_tag, record.id, item);
                 });
    CellExecution exec;
    exec.processed = n;
    exec.total = total;
    return exec;
}

void write_judgment_reports(RunStore& store, const std::string& cell_tag,
                            const DatasetManifest& dataset) {
    for (const auto& item : store.items_for_cell(cell_tag)) {
        if (!item.contains("judgment") || item.at("judgment").is_null()) continue;
        const std::string id = item.at("id").get<std::string>();
        const std::string report = item.at("judgment").at("report").get<std::string>();
        write_file_atomic(store.reports_dir() / (dataset.split_name + "-" + id + ".txt"),
                          report);
    }
}

std::uint64_t effective_seed(const PipelineConfig& cfg) { return cfg.seed; }

RunManifest build_manifest(const PipelineConfig& cfg, const Pipeline& pipeline,
                           const std::string& command, const std::string& strategy_tag,
                           const std::string& dataset_digest) {
    RunManifest manifest;
    manifest.created_at = utc_timestamp_compact();
    manifest.command = command;
    manifest.config_snapshot = config_snapshot(cfg);
    manifest.config_digest = cfg.digest();
    manifest.dataset_digest = dataset_digest;
    manifest.templates_digest = pipeline.templates().digest();
    if (!cfg.leakage_lexicon_path.empty()) {
        if (auto lexicon = try_read_file(cfg.resolve(cfg.leakage_lexicon_path))) {
            manifest.lexicon_digest = content_hash(*lexicon);
        }
    }
    manifest.mock_digest = pipeline.mock_scripts_digest();
    manifest.seed = cfg.seed;
    manifest.strategy = strategy_tag;
    return manifest;
}

std::unique_ptr<RunStore> open_or_create(const std::filesystem::path& root,
                                         const std::string& resume_run_id,
                                         const RunManifest& fresh) {
    if (resume_run_id.empty()) return RunStore::create(root, fresh);
    auto store = RunStore::open(root, resume_run_id);
    const RunManifest& existing = store->manifest();
    if (existing.config_digest != fresh.config_digest ||
        existing.dataset_digest != fresh.dataset_digest ||
        existing.templates_digest != fresh.templates_digest ||
        existing.mock_digest != fresh.mock_digest || existing.seed != fresh.seed ||
        existing.command != fresh.command || existing.strategy != fresh.strategy) {
        throw internal_error("ManifestCorrupt",
                             "run " + resume_run_id +
                                 " was recorded with different inputs; refusing to resume");
    }
    return store;
}

}  // namespace

RunResult run_evaluate(const PipelineConfig& base_cfg, const RunOptions& opt) {
    const PipelineConfig cfg = apply_overrides(base_cfg, opt);
    if (opt.dataset_path.empty()) {
        throw dataset_error("NoDataset", "evaluate needs --dataset");
    }

    const std::string strategy_text =
        opt.strategy_text.empty()
            ? (cfg.shot_count > 0 ? "caption+" + std::to_string(cfg.shot_count) + "shot+judge"
                                  : "caption+judge")
            : opt.strategy_text;
    const Strategy strategy = Strategy::parse(strategy_text);

    // Wiring probe (no transcript yet) to compute digests for the manifest.
    Pipeline probe(cfg, {}, nullptr);
    DatasetManifest dataset = load_dataset(opt.dataset_path, probe.images());
    RunManifest fresh =
        build_manifest(cfg, probe, "evaluate", strategy.tag(), dataset.digest);
    fresh.total_items = static_cast<int>(dataset.records.size());

    auto store = open_or_create(opt.out_root, opt.resume_run_id, fresh);
    RunResult result;
    result.run_dir = store->dir();
    result.run_id = store->manifest().run_id;
    if (store->manifest().complete()) {  // resume of a complete run: no-op
        result.completed = true;
        result.metrics = nlohmann::json::parse(read_file(store->metrics_path()));
        return result;
    }

    TranscriptLog transcript(store->transcript_path());
    Pipeline pipeline(cfg, store->dir(), &transcript);
    dataset = load_dataset(opt.dataset_path, pipeline.images());

    CellSpec cell{strategy, cfg.captioner, cfg.caption_judge, cfg.vqa, cfg.answer_judge,
                  strategy.use_caption ? cfg.captioner.model_name : "none",
                  cfg.vqa.model_name};
    const auto exec =
        execute_cell(pipeline, *store, cell, dataset, opt.limit, effective_seed(cfg));
    store->checkpoint([&](RunManifest& m) { m.completed_items = exec.processed; });

    if (!exec.complete()) return result;  // partial run: resumable, no metrics

    const std::string cell_tag = cell.core_tag() + "|" + task_kind_name(dataset.task);
    nlohmann::ordered_json metrics;
    metrics["kind"] = "evaluate";
    metrics["split"] = dataset.split_name;
    metrics["task"] = task_kind_name(dataset.task);
    metrics["strategy"] = strategy.tag();
    metrics["seed"] = cfg.seed;
    metrics["eval_target"] =
        eval_target_name(resolve_eval_target(cfg.eval_target, strategy.use_judge));
    metrics["reference_mode"] = cfg.reference_free ? "reference-free" : "reference-anchored";
    metrics["config_digest"] = cfg.digest();
    metrics["dataset_digest"] = dataset.digest;
    metrics["templates_digest"] = pipeline.templates().digest();
    const auto cell_metrics = aggregate_cell(*store, cell_tag, dataset);
    metrics["items"] = cell_metrics.at("items");
    metrics["classification"] = cell_metrics.at("classification");
    metrics["qa"] = cell_metrics.at("qa");

    write_file_atomic(store->metrics_path(), metrics.dump(2) + "\n");
    write_judgment_reports(*store, cell_tag, dataset);
    store->finish(metrics);

    result.completed = true;
    result.metrics = metrics;
    return result;
}

RunResult run_ablate(const PipelineConfig& base_cfg, const RunOptions& opt) {
    const PipelineConfig cfg = apply_overrides(base_cfg, opt);
    if (cfg.ablation.strategies.empty()) {
        throw config_error("NoAblationGrid", "config has no ablation.strategies");
    }
    std::filesystem::path diagnosis_path = opt.dataset_path;
    if (diagnosis_path.empty() && !cfg.ablation.diagnosis_dataset.empty()) {
        diagnosis_path = cfg.resolve(cfg.ablation.diagnosis_dataset);
    }
    std::filesystem::path knowledge_path;
    if (!cfg.ablation.knowledge_dataset.empty()) {
        knowledge_path = cfg.resolve(cfg.ablation.knowledge_dataset);
    }
    if (diagnosis_path.empty() && knowledge_path.empty()) {
        throw dataset_error("NoDataset", "ablate needs a diagnosis or knowledge dataset");
    }

    Pipeline probe(cfg, {}, nullptr);
    std::optional<DatasetManifest> diagnosis, knowledge;
    std::vector<std::string> dataset_digests;
    if (!diagnosis_path.empty()) {
        diagnosis = load_dataset(diagnosis_path, probe.images());
        dataset_digests.push_back(diagnosis->digest);
    }
    if (!knowledge_path.empty()) {
        knowledge = load_dataset(knowledge_path, probe.images());
        dataset_digests.push_back(knowledge->digest);
    }
    RunManifest fresh = build_manifest(cfg, probe, "ablate", "grid",
                                       content_hash_parts(dataset_digests));

    auto store = open_or_create(opt.out_root, opt.resume_run_id, fresh);
    RunResult result;
    result.run_dir = store->dir();
    result.run_id = store->manifest().run_id;
    if (store->manifest().complete()) {
        result.completed = true;
        result.metrics = nlohmann::json::parse(read_file(store->metrics_path()));
        return result;
    }

    TranscriptLog transcript(store->transcript_path());
    Pipeline pipeline(cfg, store->dir(), &transcript);
    if (diagnosis) diagnosis = load_dataset(diagnosis_path, pipeline.images());
    if (knowledge) knowledge = load_dataset(knowledge_path, pipeline.images());

    const std::vector<ModelEndpoint> sources = cfg.ablation.caption_sources.empty()
                                                   ? std::vector<ModelEndpoint>{cfg.captioner}
                                                   : cfg.ablation.caption_sources;
    const std::vector<ModelEndpoint> models = cfg.ablation.models.empty()
                                                  ? std::vector<ModelEndpoint>{cfg.vqa}
                                                  : cfg.ablation.models;

    std::vector<AblationCell> cells;
    bool all_complete = true;
    std::vector<std::string> baseline_done;  // one baseline per model

    for (const auto& source : sources) {
        for (const auto& model : models) {
            for (const auto& strategy_text : cfg.ablation.strategies) {
                const Strategy strategy = Strategy::parse(strategy_text);
                if (!strategy.use_caption) {
                    if (std::find(baseline_done.begin(), baseline_done.end(),
                                  model.model_name) != baseline_done.end()) {
                        continue;  // baseline is caption-source independent
                    }
                    baseline_done.push_back(model.model_name);
                }
                CellSpec cell{strategy,
                              source,
                              cfg.caption_judge,
                              model,
                              cfg.answer_judge,
                              strategy.use_caption ? source.model_name : "none",
                              model.model_name};
                AblationCell out;
                out.caption_source = cell.caption_source_tag;
                out.model = cell.model_tag;
                out.strategy = strategy.tag();
                try {
                    bool cell_complete = true;
                    if (diagnosis) {
                        const auto exec = execute_cell(pipeline, *store, cell, *diagnosis,
                                                       opt.limit, effective_seed(cfg));
                        cell_complete = cell_complete && exec.complete();
                        if (exec.complete()) {
                            const auto m = aggregate_cell(
                                *store, cell.core_tag() + "|" + task_kind_name(diagnosis->task),
                                *diagnosis);
                            out.crop_accuracy =
                                m.at("classification").at("crop_accuracy").get<std::string>();
                            out.disease_accuracy =
                                m.at("classification").at("disease_accuracy").get<std::string>();
                        }
                    }
                    if (knowledge) {
                        const auto exec = execute_cell(pipeline, *store, cell, *knowledge,
                                                       opt.limit, effective_seed(cfg));
                        cell_complete = cell_complete && exec.complete();
                        if (exec.complete()) {
                            const auto m = aggregate_cell(
                                *store, cell.core_tag() + "|" + task_kind_name(knowledge->task),
                                *knowledge);
                            out.qa_score = m.at("qa").at("mean_normalized").get<std::string>();
                        }
                    }
                    all_complete = all_complete && cell_complete;
                } catch (const Error& e) {
                    // Cell isolation: record the failure, let the grid finish.
                    out.status = "failed";
                    out.error = e.code();
                }
                cells.push_back(std::move(out));
            }
        }
    }

    if (!all_complete) return result;  // limited run: resumable, no metrics

    nlohmann::ordered_json metrics;
    metrics["kind"] = "ablate";
    metrics["seed"] = cfg.seed;
    metrics["config_digest"] = cfg.digest();
    metrics["templates_digest"] = pipeline.templates().digest();
    nlohmann::json cell_array = nlohmann::json::array();
    std::string cells_lines;
    for (const auto& cell : cells) {
        nlohmann::json j;
        to_json(j, cell);
        cell_array.push_back(j);
        cells_lines += j.dump() + "\n";
    }
    metrics["cells"] = cell_array;

    const std::string table = render_results_table(cells);
    write_file_atomic(store->cells_path(), cells_lines);
    write_file_atomic(store->table_path(), table);
    write_file_atomic(store->metrics_path(), metrics.dump(2) + "\n");
    store->finish(metrics);

    result.completed = true;
    result.metrics = metrics;
    return result;
}

std::string render_run_report(const std::filesystem::path& run_dir) {
    const auto manifest_path = run_dir / "manifest.json";
    const auto content = try_read_file(manifest_path);
    if (!content) {
        throw internal_error("ManifestCorrupt", "no manifest at " + manifest_path.string());
    }
    const RunManifest manifest = manifest_from_json(nlohmann::json::parse(*content));
    std::string report;
    report += "run " + manifest.run_id + " (" + manifest.command + ") status " +
              manifest.status + "\n";
    report += "strategy: " + manifest.strategy + ", seed " + std::to_string(manifest.seed) +
              "\n";
    report += "progress: " + std::to_string(manifest.completed_items) + "/" +
              std::to_string(manifest.total_items) + " items\n";
    if (auto metrics = try_read_file(run_dir / "metrics.json")) {
        report += "metrics:\n" + *metrics;
    }
    if (auto table = try_read_file(run_dir / "results_table.txt")) {
        report += "results table:\n" + *table;
    }
    return report;
}

}  // namespace agrivqa
