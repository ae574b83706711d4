#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idne/corpus.hpp"
#include "idne/evaluator.hpp"
#include "idne/graph.hpp"
#include "idne/interpret.hpp"
#include "idne/model.hpp"
#include "idne/trainer.hpp"

namespace fs = std::filesystem;
using namespace idne;

namespace {

struct DatasetOptions {
    std::string format = "cora";
    std::string content_path, cites_path;  // cora
    std::string docs_path, edges_path;     // generic
    std::string stopwords_path;
    std::size_t min_df = 5;
    double max_df_ratio = 0.25;
};

struct Dataset {
    RawCorpus corpus;
    Vocabulary vocab;
    DocTermMatrix X;
    LabelSet labels;
    DocumentGraph graph;
};

void add_dataset_options(CLI::App* cmd, DatasetOptions& opts) {
    cmd->add_option("--format", opts.format, "dataset format")
        ->check(CLI::IsMember({"cora", "generic"}))
        ->capture_default_str();
    cmd->add_option("--content", opts.content_path, "cora content file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--cites", opts.cites_path, "cora cites file")->check(CLI::ExistingFile);
    cmd->add_option("--docs", opts.docs_path, "generic docs file")->check(CLI::ExistingFile);
    cmd->add_option("--edges", opts.edges_path, "generic edges file")->check(CLI::ExistingFile);
    cmd->add_option("--stopwords", opts.stopwords_path, "replacement stop-word list, one per line")
        ->check(CLI::ExistingFile);
    cmd->add_option("--min-df", opts.min_df, "minimum document frequency")
        ->capture_default_str();
    cmd->add_option("--max-df-ratio", opts.max_df_ratio, "maximum document frequency ratio")
        ->capture_default_str();
}

std::unordered_set<std::string> load_stopword_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.insert(line);
    }
    return words;
}

RawCorpus load_corpus(const DatasetOptions& opts) {
    if (opts.format == "cora") {
        if (opts.content_path.empty() || opts.cites_path.empty())
            throw std::invalid_argument("cora format needs --content and --cites");
        return load_cora(opts.content_path, opts.cites_path);
    }
    if (opts.docs_path.empty() || opts.edges_path.empty())
        throw std::invalid_argument("generic format needs --docs and --edges");
    return load_generic(opts.docs_path, opts.edges_path);
}

Dataset load_dataset(const DatasetOptions& opts) {
    Dataset data;
    data.corpus = load_corpus(opts);

    std::unordered_set<std::string> custom_stopwords;
    VocabOptions vopts;
    vopts.min_doc_freq = opts.min_df;
    vopts.max_doc_ratio = opts.max_df_ratio;
    if (!opts.stopwords_path.empty()) {
        custom_stopwords = load_stopword_file(opts.stopwords_path);
        vopts.stopwords = &custom_stopwords;
    }
    data.vocab = build_vocab(data.corpus, vopts);
    data.X = vectorize(data.corpus, data.vocab, vopts);
    data.labels = collect_labels(data.corpus);
    data.graph = build_graph(data.corpus);
    return data;
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) throw std::invalid_argument("output directory not set");
    fs::create_directories(dir);
}

void write_loss_csv(const std::vector<double>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,loss\n";
    out << std::setprecision(10);
    for (std::size_t i = 0; i < curve.size(); ++i) out << i + 1 << ',' << curve[i] << '\n';
}

int cmd_train(const DatasetOptions& dopts, const TrainConfig& config, const std::string& out_dir,
              std::size_t checkpoint_every) {
    config.validate();
    Dataset data = load_dataset(dopts);
    ensure_dir(out_dir);

    const ReachabilityMatrix reach = build_delta(data.graph);
    std::cout << "docs=" << data.X.n_docs << " links=" << data.graph.undirected_edges()
              << " vocab=" << data.vocab.size() << " delta_positives=" << reach.positive_count()
              << " delta_density=" << std::setprecision(4) << reach.density() << '\n';

    StepHook hook;
    if (checkpoint_every > 0) {
        hook = [&](std::size_t step, const ModelParams& params) {
            if (step % checkpoint_every != 0 || step == config.steps) return;
            const std::string tag = out_dir + "/model_step" + std::to_string(step);
            save_checkpoint(params, data.vocab, tag + ".bin", out_dir + "/vocab.txt");
        };
    }
    TrainReport report = train(data.X, reach, config, hook);

    save_checkpoint(report.params, data.vocab, out_dir + "/model.bin", out_dir + "/vocab.txt");
    write_loss_csv(report.loss_curve, out_dir + "/loss.csv");

    std::cout << "final_loss=" << std::setprecision(6) << report.loss_curve.back()
              << " flagged_docs=" << report.flagged_docs << " wallclock="
              << std::setprecision(4) << report.wallclock_seconds << "s\n";
    std::cout << "checkpoint " << out_dir << "/model.bin (vocab " << out_dir << "/vocab.txt)\n";
    return 0;
}

std::vector<double> parse_ratio_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw std::invalid_argument("empty ratio list");
    return out;
}

int cmd_eval(const DatasetOptions& dopts, const std::string& task, const std::string& model_path,
             const std::string& vocab_path, const std::string& ratios_csv,
             const TrainConfig& config, SplitSpec spec, const std::string& out_dir) {
    ensure_dir(out_dir);
    if (task == "traditional") {
        if (model_path.empty() || vocab_path.empty())
            throw std::invalid_argument("traditional task needs --model and --vocab");
        auto [params, vocab] = load_checkpoint(model_path, vocab_path);
        RawCorpus corpus = load_corpus(dopts);
        VocabOptions vopts;  // vocabulary is fixed by the checkpoint
        std::unordered_set<std::string> custom_stopwords;
        if (!dopts.stopwords_path.empty()) {
            custom_stopwords = load_stopword_file(dopts.stopwords_path);
            vopts.stopwords = &custom_stopwords;
        }
        const DocTermMatrix X = vectorize(corpus, vocab, vopts);
        const LabelSet labels = collect_labels(corpus);
        const Matrix emb = embed_corpus(params, X);
        const auto cells = eval_traditional(emb, labels, parse_ratio_list(ratios_csv), spec);
        write_report_csv(cells, out_dir + "/traditional.csv");
        write_report_json(cells, out_dir + "/traditional.json");
        for (const auto& cell : cells)
            std::cout << "traditional ratio=" << cell.ratio << " auc=" << std::setprecision(6)
                      << cell.mean() << " +- " << cell.stddev() << '\n';
        return 0;
    }
    if (task == "inductive") {
        config.validate();
        Dataset data = load_dataset(dopts);
        const InductiveReport report =
            eval_inductive(data.X, data.graph, data.labels, config, spec);
        const std::vector<EvalCell> cells = {report.classification, report.link_prediction};
        write_report_csv(cells, out_dir + "/inductive.csv");
        write_report_json(cells, out_dir + "/inductive.json");
        for (const auto& cell : cells)
            std::cout << cell.task << " hidden=" << cell.ratio << " auc=" << std::setprecision(6)
                      << cell.mean() << " +- " << cell.stddev() << '\n';
        if (report.flagged_embeddings)
            std::cout << "flagged zero-term hidden docs: " << report.flagged_embeddings << '\n';
        return 0;
    }
    throw std::invalid_argument("unknown task \"" + task + "\"");
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const long long v = std::stoll(item);
        if (v <= 0) throw std::invalid_argument("grid values must be positive");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

int cmd_sweep(const DatasetOptions& dopts, const TrainConfig& base, const SplitSpec& spec,
              const std::string& topics_csv, const std::string& steps_csv,
              const std::string& ratios_csv, const std::string& out_dir) {
    const auto topic_grid = parse_size_list(topics_csv);
    const auto step_grid = parse_size_list(steps_csv);
    if (topic_grid.empty() || step_grid.empty())
        throw std::invalid_argument("sweep grids must be non-empty");
    const auto ratios = parse_ratio_list(ratios_csv);
    Dataset data = load_dataset(dopts);
    const ReachabilityMatrix reach = build_delta(data.graph);
    ensure_dir(out_dir);

    std::ofstream out(out_dir + "/sweep.csv");
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/sweep.csv");
    out << "n_t,steps,ratio,mean_auc\n";
    out << std::setprecision(8);
    for (std::size_t nt : topic_grid) {
        for (std::size_t steps : step_grid) {
            TrainConfig cfg = base;
            cfg.n_topics = nt;
            cfg.steps = steps;
            cfg.seed = derive_seed(base.seed, "sweep", nt * 1000003 + steps);
            cfg.validate();
            const TrainReport trained = train(data.X, reach, cfg);
            const Matrix emb = embed_corpus(trained.params, data.X);
            const auto cells = eval_traditional(emb, data.labels, ratios, spec);
            for (const auto& cell : cells) {
                out << nt << ',' << steps << ',' << cell.ratio << ',' << cell.mean() << '\n';
                std::cout << "n_t=" << nt << " steps=" << steps << " ratio=" << cell.ratio
                          << " auc=" << std::setprecision(6) << cell.mean() << '\n';
            }
        }
    }
    return 0;
}

int cmd_embed(const std::string& model_path, const std::string& vocab_path,
              const std::string& docs_path, const std::string& out_path) {
    auto [params, vocab] = load_checkpoint(model_path, vocab_path);
    std::ifstream in(docs_path);
    if (!in) throw std::runtime_error("cannot open " + docs_path);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << std::setprecision(12);

    std::string line;
    std::size_t line_no = 0, zero_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        // generic 3-field rows or plain <id>\t<text>
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() < 2)
            throw std::runtime_error(docs_path + ":" + std::to_string(line_no) +
                                     ": expected <id>\\t[<labels>\\t]<text>");
        const std::string& id = fields.front();
        const std::string& text = fields.back();

        std::unordered_map<std::uint32_t, std::uint32_t> counts;
        for (const auto& tok : tokenize(text)) {
            auto it = vocab.term_to_index.find(tok);
            if (it != vocab.term_to_index.end()) counts[it->second] += 1;
        }
        std::vector<TermCount> row;
        for (const auto& [term, count] : counts) row.push_back({term, count});
        std::sort(row.begin(), row.end(),
                  [](const TermCount& a, const TermCount& b) { return a.term < b.term; });

        out << id << '\t';
        if (row.empty()) {
            ++zero_rows;
            for (std::size_t j = 0; j < params.dim; ++j) out << (j ? " " : "") << 0.0;
        } else {
            const DocEmbedding emb = embed_doc(params, row);
            for (std::size_t j = 0; j < params.dim; ++j) out << (j ? " " : "") << emb.d[j];
        }
        out << '\n';
    }
    if (zero_rows)
        std::cerr << "warning: " << zero_rows << " document(s) had no in-vocabulary words\n";
    return 0;
}

int cmd_interpret_topics(const std::string& model_path, const std::string& vocab_path,
                         std::size_t k, const std::string& out_path) {
    auto [params, vocab] = load_checkpoint(model_path, vocab_path);
    const TopicSummary summary = topic_top_words(params, vocab, std::min(k, vocab.size()));
    const std::string table = render_topics_table(summary, vocab);
    if (out_path.empty()) {
        std::cout << table;
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << table;
    }
    return 0;
}

int cmd_interpret_annotate(const std::string& model_path, const std::string& vocab_path,
                           std::string text, const std::string& file_path,
                           const std::string& out_prefix) {
    auto [params, vocab] = load_checkpoint(model_path, vocab_path);
    if (!file_path.empty()) {
        std::ifstream in(file_path);
        if (!in) throw std::runtime_error("cannot open " + file_path);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    if (text.empty()) throw std::invalid_argument("give --text or --file");

    const DocAnnotation ann = annotate_document(params, vocab, text);
    {
        std::ofstream out(out_prefix + ".txt");
        if (!out) throw std::runtime_error("cannot write " + out_prefix + ".txt");
        out << render_annotation_text(ann, vocab);
    }
    {
        std::ofstream out(out_prefix + ".html");
        if (!out) throw std::runtime_error("cannot write " + out_prefix + ".html");
        out << render_annotation_html(ann, vocab);
    }
    std::cout << "wrote " << out_prefix << ".txt and " << out_prefix << ".html\n";
    return 0;
}

}  // namespace

// Flat key=value run-config: each line becomes --key value injected right
// after the subcommand token, so explicit flags (parsed last, TakeLast
// policy) override the file.
std::vector<std::string> expand_config_tokens(int argc, char** argv) {
    std::vector<std::string> tokens;
    for (int i = 1; i < argc; ++i) tokens.emplace_back(argv[i]);

    std::string config_path;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == "--config" && i + 1 < tokens.size()) {
            config_path = tokens[i + 1];
        } else if (tokens[i].rfind("--config=", 0) == 0) {
            config_path = tokens[i].substr(9);
        }
    }
    if (config_path.empty() || tokens.empty()) return tokens;

    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open config file " + config_path);
    std::vector<std::string> injected;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line is not key=value: " + line);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line has empty key: " + line);
        injected.push_back("--" + key);
        injected.push_back(value);
    }

    std::vector<std::string> out;
    out.push_back(tokens.front());  // the subcommand
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), tokens.begin() + 1, tokens.end());
    return out;
}

int main(int argc, char** argv) {
    CLI::App app{"document network embedding via topic-word attention"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    DatasetOptions dopts;
    TrainConfig config;
    SplitSpec spec;
    std::string out_dir;
    std::string model_path, vocab_path;

    auto add_train_options = [&](CLI::App* cmd) {
        cmd->add_option("--topics", config.n_topics, "number of topic vectors")
            ->capture_default_str();
        cmd->add_option("--dim", config.dim, "embedding dimension")->capture_default_str();
        cmd->add_option("--steps", config.steps, "mini-batch count")->capture_default_str();
        cmd->add_option("--batch", config.batch_size, "batch size (half positive)")
            ->capture_default_str();
        cmd->add_option("--lr", config.learning_rate, "ADAM learning rate")
            ->capture_default_str();
        cmd->add_option("--seed", config.seed, "root random seed")->capture_default_str();
    };
    auto add_out_option = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "output directory")
            ->envname("IDNE_OUTPUT_DIR")
            ->required();
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train word and topic vectors");
    std::string config_path;
    train_cmd->add_option("--config", config_path, "flat key=value run-config file");
    add_dataset_options(train_cmd, dopts);
    add_train_options(train_cmd);
    add_out_option(train_cmd);
    std::size_t checkpoint_every = 0;
    train_cmd->add_option("--checkpoint-every", checkpoint_every,
                          "also write model_step<k>.bin every k steps");

    std::string task = "traditional";
    std::string ratios_csv = "0.02,0.04,0.06,0.08,0.10";
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate representations");
    eval_cmd->add_option("--config", config_path, "flat key=value run-config file");
    add_dataset_options(eval_cmd, dopts);
    add_train_options(eval_cmd);  // inductive retraining configuration
    add_out_option(eval_cmd);
    eval_cmd->add_option("--task", task, "traditional or inductive");
    eval_cmd->add_option("--model", model_path, "trained checkpoint")->check(CLI::ExistingFile);
    eval_cmd->add_option("--vocab", vocab_path, "checkpoint vocabulary")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--ratios", ratios_csv, "train ratios for classification")
        ->capture_default_str();
    eval_cmd->add_option("--hidden", spec.hidden_fraction, "hidden-doc fraction")
        ->capture_default_str();
    eval_cmd->add_option("--reps", spec.repetitions, "repetitions")->capture_default_str();
    eval_cmd->add_option("--eval-seed", spec.seed, "evaluation seed")->capture_default_str();
    eval_cmd->add_flag("--serial", "disable repetition parallelism");

    std::string topics_grid = "1,2,4,8,16,32";
    std::string steps_grid = "5000";
    std::string sweep_ratios = "0.10";
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid over topic count and steps");
    sweep_cmd->add_option("--config", config_path, "flat key=value run-config file");
    add_dataset_options(sweep_cmd, dopts);
    add_train_options(sweep_cmd);
    add_out_option(sweep_cmd);
    sweep_cmd->add_option("--topics-grid", topics_grid, "comma list of topic counts")
        ->capture_default_str();
    sweep_cmd->add_option("--steps-grid", steps_grid, "comma list of step counts")
        ->capture_default_str();
    sweep_cmd->add_option("--ratios", sweep_ratios, "train ratios")->capture_default_str();
    sweep_cmd->add_option("--reps", spec.repetitions, "repetitions")->capture_default_str();
    sweep_cmd->add_option("--eval-seed", spec.seed, "evaluation seed")->capture_default_str();

    std::string docs_path, out_path;
    CLI::App* embed_cmd = app.add_subcommand("embed", "embed documents from text alone");
    embed_cmd->add_option("--model", model_path, "trained checkpoint")
        ->check(CLI::ExistingFile)
        ->required();
    embed_cmd->add_option("--vocab", vocab_path, "checkpoint vocabulary")
        ->check(CLI::ExistingFile)
        ->required();
    embed_cmd->add_option("--docs", docs_path, "input docs file")
        ->check(CLI::ExistingFile)
        ->required();
    embed_cmd->add_option("--out", out_path, "output embeddings file")->required();

    CLI::App* interpret_cmd = app.add_subcommand("interpret", "inspect a trained model");
    interpret_cmd->require_subcommand(1);
    std::size_t top_k = 10;
    std::string topics_out;
    CLI::App* topics_cmd = interpret_cmd->add_subcommand("topics", "top words per topic");
    topics_cmd->add_option("--model", model_path, "trained checkpoint")
        ->check(CLI::ExistingFile)
        ->required();
    topics_cmd->add_option("--vocab", vocab_path, "checkpoint vocabulary")
        ->check(CLI::ExistingFile)
        ->required();
    topics_cmd->add_option("-k,--top", top_k, "words per topic")->capture_default_str();
    topics_cmd->add_option("--out", topics_out, "write table here instead of stdout");

    std::string ann_text, ann_file, ann_prefix = "annotation";
    CLI::App* annotate_cmd =
        interpret_cmd->add_subcommand("annotate", "per-word topic annotation");
    annotate_cmd->add_option("--model", model_path, "trained checkpoint")
        ->check(CLI::ExistingFile)
        ->required();
    annotate_cmd->add_option("--vocab", vocab_path, "checkpoint vocabulary")
        ->check(CLI::ExistingFile)
        ->required();
    annotate_cmd->add_option("--text", ann_text, "document text");
    annotate_cmd->add_option("--file", ann_file, "document file")->check(CLI::ExistingFile);
    annotate_cmd->add_option("--out-prefix", ann_prefix, "output path prefix")
        ->capture_default_str();

    try {
        std::vector<std::string> tokens = expand_config_tokens(argc, argv);
        std::reverse(tokens.begin(), tokens.end());  // CLI11 vector parse order
        app.parse(tokens);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        spec.parallel = eval_cmd->count("--serial") == 0;
        if (train_cmd->parsed())
            return cmd_train(dopts, config, out_dir, checkpoint_every);
        if (eval_cmd->parsed())
            return cmd_eval(dopts, task, model_path, vocab_path, ratios_csv, config, spec,
                            out_dir);
        if (sweep_cmd->parsed())
            return cmd_sweep(dopts, config, spec, topics_grid, steps_grid, sweep_ratios, out_dir);
        if (embed_cmd->parsed()) return cmd_embed(model_path, vocab_path, docs_path, out_path);
        if (topics_cmd->parsed())
            return cmd_interpret_topics(model_path, vocab_path, top_k, topics_out);
        if (annotate_cmd->parsed())
            return cmd_interpret_annotate(model_path, vocab_path, ann_text, ann_file, ann_prefix);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
