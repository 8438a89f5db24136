#include "u1/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "u1/activation.hpp"
#include "u1/ann_index.hpp"
#include "u1/classifier.hpp"
#include "u1/errors.hpp"
#include "u1/labels.hpp"
#include "u1/manifest.hpp"
#include "u1/parallel.hpp"
#include "u1/report.hpp"
#include "u1/symmetry.hpp"
#include "u1/synthetic.hpp"
#include "u1/trainer.hpp"

namespace u1::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string out_dir = "u1_out";
  std::size_t workers = default_workers();
  bool deterministic = false;
  int verbosity = 0;
};

struct RetrievalOptions {
  std::string manifest;
  std::string index;
  std::string metric = "euclidean";
  ClassifierConfig classifier;
  IndexConfig index_config;
};

struct DataOptions {
  std::string dataset = "blobs";
  std::size_t n_classes = 8;
  std::size_t dim = 16;
  std::size_t per_class = 100;
  std::size_t side = 16;
  double center_scale = 3.0;
  double spread = 1.0;
  double noise = 0.1;
  std::uint64_t data_seed = 0;
  std::vector<std::size_t> hidden{32};
  std::vector<std::size_t> u1_hidden;
  std::size_t augment_pad = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--workers", c.workers, "Worker threads")->capture_default_str();
  sub->add_flag("--deterministic", c.deterministic, "Single-threaded reductions");
  sub->add_flag("-v,--verbose", c.verbosity, "Progress on the error stream");
}

void add_index_flags(CLI::App* sub, RetrievalOptions& r) {
  sub->add_option("--manifest", r.manifest, "Manifest (JSON lines)");
  sub->add_option("--trees", r.index_config.n_trees, "Random projection trees")->capture_default_str();
  sub->add_option("--leaf-size", r.index_config.leaf_size, "Max vectors per leaf")->capture_default_str();
  sub->add_option("--seed", r.index_config.seed, "Index seed")->capture_default_str();
  sub->add_option("--budget", r.index_config.search_budget, "Search budget (0: trees * k)")
      ->capture_default_str();
  sub->add_option("--metric", r.metric, "euclidean | cosine")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  sub->add_flag("--normalize,!--no-normalize", r.classifier.normalize_vectors,
                "Unit-normalize pixel vectors");
}

void add_classifier_flags(CLI::App* sub, RetrievalOptions& r) {
  add_index_flags(sub, r);
  sub->add_option("--index", r.index, "Prebuilt index from the index subcommand");
  sub->add_option("--k", r.classifier.k, "Neighbors per query pixel")->capture_default_str();
  sub->add_option("--epsilon", r.classifier.epsilon, "Kernel bandwidth floor")->capture_default_str();
  sub->add_flag("--exclude-same-image,!--include-same-image", r.classifier.exclude_same_image,
                "Skip memory vectors of the query image");
  sub->add_flag("--exact", r.classifier.exact, "Full-scan retrieval");
}

void add_data_flags(CLI::App* sub, DataOptions& d) {
  sub->add_option("--dataset", d.dataset, "blobs | bars")
      ->check(CLI::IsMember({"blobs", "bars"}))
      ->capture_default_str();
  sub->add_option("--n-classes", d.n_classes, "Classes")->capture_default_str();
  sub->add_option("--dim", d.dim, "Blob dimension")->capture_default_str();
  sub->add_option("--per-class", d.per_class, "Samples per class")->capture_default_str();
  sub->add_option("--side", d.side, "Bar image side")->capture_default_str();
  sub->add_option("--center-scale", d.center_scale, "Blob center spread")->capture_default_str();
  sub->add_option("--spread", d.spread, "Blob sample spread")->capture_default_str();
  sub->add_option("--noise", d.noise, "Bar pixel noise")->capture_default_str();
  sub->add_option("--data-seed", d.data_seed, "Dataset seed")->capture_default_str();
  sub->add_option("--hidden", d.hidden, "Trunk widths")->capture_default_str();
  sub->add_option("--u1-hidden", d.u1_hidden, "U(1) head hidden widths");
  sub->add_option("--augment-pad", d.augment_pad, "Flip/crop padding for bar images (0: off)")
      ->capture_default_str();
}

void add_train_flags(CLI::App* sub, TrainConfig& t, std::string& objective) {
  sub->add_option("--epochs", t.epochs, "Epochs")->capture_default_str();
  sub->add_option("--lr", t.lr, "Initial learning rate")->capture_default_str();
  sub->add_option("--lr-min", t.lr_min, "Final learning rate")->capture_default_str();
  sub->add_option("--lambda", t.lambda, "U(1) loss weight")->capture_default_str();
  sub->add_option("--batch", t.batch, "Batch size")->capture_default_str();
  sub->add_option("--objective", objective, "combined | one_hot")
      ->check(CLI::IsMember({"combined", "one_hot"}))
      ->capture_default_str();
}

void prepare_retrieval(RetrievalOptions& r) {
  const Metric m = parse_metric(r.metric);
  r.classifier.metric = m;
  r.index_config.metric = m;
  r.classifier.search_budget = r.index_config.search_budget;
  r.index_config.validate();
  r.classifier.validate();
}

std::vector<MemoryRecord> load_records(const std::string& manifest) {
  if (manifest.empty()) throw std::invalid_argument("--manifest is required");
  auto records = read_manifest(manifest);
  validate_manifest(records);
  return records;
}

template <typename Pred>
std::vector<MemoryRecord> select(const std::vector<MemoryRecord>& records, Pred pred) {
  std::vector<MemoryRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), pred);
  return out;
}

std::vector<MemoryRecord> memory_records(const std::vector<MemoryRecord>& records) {
  auto out = select(records, [](const MemoryRecord& r) { return r.is_memory(); });
  if (out.empty()) throw DataError("manifest has no train or memory records");
  return out;
}

std::vector<MemoryRecord> query_records(const std::vector<MemoryRecord>& records) {
  auto out = select(records, [](const MemoryRecord& r) { return !r.is_memory(); });
  if (out.empty()) throw DataError("manifest has no query or test records");
  return out;
}

json index_sidecar(const MemoryBank& bank) {
  return {{"normalized", bank.normalized()},
          {"index_config", to_json(bank.index().config())},
          {"vectors", bank.size()},
          {"dim", bank.channels()}};
}

MemoryBank open_bank(const RetrievalOptions& r, const std::vector<MemoryRecord>& records,
                     std::size_t workers) {
  if (!r.index.empty()) {
    const fs::path sidecar = fs::path(r.index).replace_extension(".json");
    const json meta = json::parse(read_text(sidecar));
    auto bank = MemoryBank::from_forest(RPForest::load(r.index), meta.at("normalized").get<bool>());
    if (bank.metric() != r.classifier.metric || bank.normalized() != r.classifier.normalize_vectors) {
      throw std::invalid_argument("--metric/--normalize differ from the prebuilt index");
    }
    return bank;
  }
  const auto memory = memory_records(records);
  const auto maps = load_labeled_maps(memory);
  return MemoryBank::build(maps, r.classifier.normalize_vectors, r.index_config, workers);
}

Dataset make_dataset(const DataOptions& d) {
  if (d.dataset == "bars") return make_bar_images(d.n_classes, d.per_class, d.side, d.noise, d.data_seed);
  return make_gaussian_blobs(d.n_classes, d.dim, d.per_class, d.center_scale, d.spread, d.data_seed);
}

NetConfig net_config(const DataOptions& d, const Dataset& data) {
  return {data.x.cols, d.hidden, d.n_classes, d.u1_hidden};
}

json data_json(const DataOptions& d) {
  return {{"dataset", d.dataset},     {"n_classes", d.n_classes}, {"dim", d.dim},
          {"per_class", d.per_class}, {"side", d.side},           {"center_scale", d.center_scale},
          {"spread", d.spread},       {"noise", d.noise},         {"data_seed", d.data_seed},
          {"hidden", d.hidden},       {"u1_hidden", d.u1_hidden}, {"augment_pad", d.augment_pad}};
}

json retrieval_json(const RetrievalOptions& r) {
  return {{"manifest", r.manifest},
          {"index", r.index},
          {"classifier", to_json(r.classifier)},
          {"index_config", to_json(r.index_config)}};
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memory-based classification and symmetry analysis of activation maps", "u1"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Common common;
  RetrievalOptions retr;
  DataOptions data_opt;
  TrainConfig train_cfg;
  std::string objective = "combined";
  LabelConfig label_cfg;
  std::string label_kind = "unit_circle";
  std::string query_path, query_id;
  std::int64_t query_class = -1;
  std::string split_filter = "all";
  std::string pairing_name = "all", weighting_name = "uniform";
  bool leave_one_out = false;
  std::size_t cond_row = 0, cond_col = 0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> kinds{"centered", "discrete", "uniform", "unit_circle"};
  double test_fraction = 0.3;
  bool uncontrolled_init = false;
  std::vector<std::string> report_inputs;

  auto* ingest = app.add_subcommand("ingest", "Validate a manifest and its AMF files");
  ingest->add_option("--manifest", retr.manifest, "Manifest (JSON lines)")->required();
  add_common(ingest, common);

  auto* index = app.add_subcommand("index", "Build and persist a random projection forest");
  add_index_flags(index, retr);
  add_common(index, common);

  auto* classify_cmd = app.add_subcommand("classify", "Class likelihoods for one query map");
  add_classifier_flags(classify_cmd, retr);
  classify_cmd->add_option("--query", query_path, "Query AMF")->required();
  classify_cmd->add_option("--query-id", query_id, "Image id of the query (default: file stem)");
  classify_cmd->add_option("--class-id", query_class, "Known class of the query")->capture_default_str();
  add_common(classify_cmd, common);

  auto* eval = app.add_subcommand("eval", "Classify every query/test record");
  add_classifier_flags(eval, retr);
  add_common(eval, common);

  auto* analyze = app.add_subcommand("analyze", "Energy and match-location analyses");
  analyze->require_subcommand(1);
  auto* energy = analyze->add_subcommand("energy", "Mean energy map and radial profile");
  energy->add_option("--manifest", retr.manifest, "Manifest (JSON lines)")->required();
  energy->add_option("--split", split_filter, "all | memory | query")
      ->check(CLI::IsMember({"all", "memory", "query"}))
      ->capture_default_str();
  add_common(energy, common);
  std::vector<CLI::App*> match_modes;
  for (const char* mode : {"matches", "angular", "conditional", "radtan"}) {
    auto* sub = analyze->add_subcommand(mode, fmt::format("Match-location analysis: {}", mode));
    add_classifier_flags(sub, retr);
    sub->add_option("--pairing", pairing_name, "all | same_class | cross_class")
        ->check(CLI::IsMember({"all", "same_class", "cross_class"}))
        ->capture_default_str();
    sub->add_option("--weighting", weighting_name, "uniform | kernel")
        ->check(CLI::IsMember({"uniform", "kernel"}))
        ->capture_default_str();
    sub->add_flag("--leave-one-out", leave_one_out, "Query every memory image against the rest");
    add_common(sub, common);
    match_modes.push_back(sub);
  }
  match_modes[2]->add_option("--row", cond_row, "Query pixel row")->required();
  match_modes[2]->add_option("--col", cond_col, "Query pixel column")->required();

  auto* labels_cmd = app.add_subcommand("labels", "Generate per-class U(1) labels");
  labels_cmd->add_option("--kind", label_kind, "centered | discrete | uniform | unit_circle")
      ->capture_default_str();
  labels_cmd->add_option("--n-classes", label_cfg.n_classes, "Classes")->required();
  labels_cmd->add_option("--seed", label_cfg.seed, "Label seed")->capture_default_str();
  add_common(labels_cmd, common);

  auto* train_cmd = app.add_subcommand("train", "Train the toy network on synthetic data");
  add_data_flags(train_cmd, data_opt);
  add_train_flags(train_cmd, train_cfg, objective);
  train_cmd->add_option("--seed", train_cfg.seed, "Init, shuffle and augmentation seed")
      ->capture_default_str();
  train_cmd->add_option("--kind", label_kind, "Label kind")->capture_default_str();
  train_cmd->add_option("--label-seed", label_cfg.seed, "Label seed")->capture_default_str();
  add_common(train_cmd, common);

  auto* ablate = app.add_subcommand("ablate", "Compare label kinds across seeds");
  add_data_flags(ablate, data_opt);
  add_train_flags(ablate, train_cfg, objective);
  ablate->add_option("--seeds", seeds, "Seeds (init, split, labels, shuffling)")->capture_default_str();
  ablate->add_option("--kinds", kinds, "Label kinds")->capture_default_str();
  ablate->add_option("--test-fraction", test_fraction, "Held-out fraction")->capture_default_str();
  ablate->add_flag("--uncontrolled-init", uncontrolled_init, "Draw initial weights per label kind");
  add_common(ablate, common);

  auto* report = app.add_subcommand("report", "Bundle CSV/PGM artifacts with an index");
  report->add_option("--input", report_inputs, "Artifact files")->required();
  add_common(report, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::vector<std::string> path;
  for (CLI::App* a = &app;;) {
    auto subs = a->get_subcommands();
    if (subs.empty()) break;
    a = subs.front();
    path.push_back(a->get_name());
  }
  const std::string command = fmt::format("{}", fmt::join(path, " "));
  if (common.deterministic) common.workers = 1;
  const fs::path out_dir = common.out_dir;
  auto log = [&](const std::string& msg) {
    if (common.verbosity > 0) err << "[u1 " << command << "] " << msg << "\n";
  };
  auto write_echo = [&](json config) {
    json echo = {{"subcommand", command},
                 {"argv", std::vector<std::string>(args.begin(), args.end())},
                 {"workers", common.workers},
                 {"deterministic", common.deterministic},
                 {"verbosity", common.verbosity},
                 {"config", std::move(config)}};
    write_text(out_dir / "config.json", echo.dump(2) + "\n");
  };

  try {
    if (ingest->parsed()) {
      write_echo({{"manifest", retr.manifest}});
      const auto records = load_records(retr.manifest);
      const json summary = ingest_summary(records);
      write_text(out_dir / "ingest.json", summary.dump(2) + "\n");
      emit(out, summary);
    } else if (index->parsed()) {
      prepare_retrieval(retr);
      write_echo(retrieval_json(retr));
      const auto records = load_records(retr.manifest);
      const auto bank = open_bank(retr, records, common.workers);
      log(fmt::format("indexed {} vectors", bank.size()));
      bank.index().save(out_dir / "index.u1ix");
      json meta = index_sidecar(bank);
      write_text(out_dir / "index.json", meta.dump(2) + "\n");
      std::vector<std::size_t> depths;
      for (std::size_t t = 0; t < bank.index().trees().size(); ++t) depths.push_back(bank.index().depth(t));
      meta["depths"] = depths;
      meta["path"] = (out_dir / "index.u1ix").string();
      emit(out, meta);
    } else if (classify_cmd->parsed()) {
      prepare_retrieval(retr);
      if (query_id.empty()) query_id = fs::path(query_path).stem().string();
      json echo = retrieval_json(retr);
      echo["query"] = query_path;
      echo["query_id"] = query_id;
      echo["class_id"] = query_class;
      write_echo(echo);
      const auto records = retr.index.empty() ? load_records(retr.manifest) : std::vector<MemoryRecord>{};
      const auto bank = open_bank(retr, records, common.workers);
      const LabeledMap query{query_id, query_class, load_activation_map(query_path)};
      const json table = to_json(image_likelihood(query, bank, retr.classifier));
      write_text(out_dir / "likelihood.json", table.dump(2) + "\n");
      emit(out, table);
    } else if (eval->parsed()) {
      prepare_retrieval(retr);
      write_echo(retrieval_json(retr));
      const auto records = load_records(retr.manifest);
      const auto bank = open_bank(retr, records, common.workers);
      const auto queries = load_labeled_maps(query_records(records));
      log(fmt::format("evaluating {} queries", queries.size()));
      const auto result = evaluate(queries, bank, retr.classifier, common.workers);
      const json summary = eval_summary(result, retr.classifier, bank.index().config());
      write_text(out_dir / "eval.csv", eval_csv(result));
      write_text(out_dir / "summary.json", summary.dump(2) + "\n");
      emit(out, summary);
    } else if (energy->parsed()) {
      write_echo({{"manifest", retr.manifest}, {"split", split_filter}});
      const auto records = load_records(retr.manifest);
      std::vector<ActivationMap> maps;
      for (const auto& r : records) {
        if (split_filter == "all" || (split_filter == "memory") == r.is_memory()) {
          maps.push_back(load_activation_map(r.path));
        }
      }
      if (maps.empty()) throw DataError("no records match --split " + split_filter);
      const auto summary = aggregate_energy(maps);
      const auto scaling = write_heatmap(out_dir / "energy_mean.pgm", summary.mean);
      write_text(out_dir / "radial_profile.csv", radial_profile_csv(summary.profile));
      const auto centroid = energy_centroid(summary.mean);
      emit(out, {{"images", maps.size()},
                 {"height", summary.mean.height},
                 {"width", summary.mean.width},
                 {"centroid", {{"x", centroid.x}, {"y", centroid.y}}},
                 {"heatmap", to_json(scaling, summary.mean.height, summary.mean.width)},
                 {"profile",
                  {{"radius", summary.profile.radius},
                   {"mean_energy", summary.profile.mean_energy},
                   {"asymmetry", summary.profile.asymmetry},
                   {"counts", summary.profile.counts}}}});
    } else {
      auto mode = std::find_if(match_modes.begin(), match_modes.end(),
                               [](CLI::App* a) { return a->parsed(); });
      if (mode != match_modes.end()) {
        prepare_retrieval(retr);
        if (leave_one_out && !retr.classifier.exclude_same_image) {
          throw std::invalid_argument("--leave-one-out requires --exclude-same-image");
        }
        const Pairing pairing = parse_pairing(pairing_name);
        const Weighting weighting = parse_weighting(weighting_name);
        json echo = retrieval_json(retr);
        echo["pairing"] = pairing_name;
        echo["weighting"] = weighting_name;
        echo["leave_one_out"] = leave_one_out;
        if (*mode == match_modes[2]) echo["row"] = cond_row, echo["col"] = cond_col;
        write_echo(echo);
        const auto records = load_records(retr.manifest);
        const auto bank = open_bank(retr, records, common.workers);
        const auto queries =
            load_labeled_maps(leave_one_out ? memory_records(records) : query_records(records));
        const auto matches = match_locations(queries, bank, retr.classifier, pairing, common.workers);
        log(fmt::format("{} of {} matches kept", matches.points.size(), matches.retrieved));
        const std::string name = (*mode)->get_name();
        if (name == "matches") {
          write_text(out_dir / "matches.csv", matches_csv(matches.points));
          emit(out, {{"retrieved", matches.retrieved},
                     {"kept", matches.points.size()},
                     {"pairing", pairing_name}});
        } else if (name == "angular") {
          const auto rows = angular_report(matches.points, weighting);
          write_text(out_dir / "angular.csv", angular_report_csv(rows));
          json classes = json::array();
          for (const auto& row : rows) {
            classes.push_back({{"class_id", row.class_id},
                               {"stats", to_json(row.stats)},
                               {"radtan", to_json(row.radtan)},
                               {"confusion_radius_68", row.confusion_radius}});
          }
          emit(out, {{"pairing", pairing_name},
                     {"weighting", weighting_name},
                     {"overall", to_json(circular_stats(matches.points, weighting))},
                     {"classes", classes}});
        } else if (name == "conditional") {
          const auto shape = bank.shape_of(bank.table().key(0).image_id);
          const auto hist = conditional_match_distribution(matches.points, cond_row, cond_col,
                                                           shape.height, shape.width);
          const auto file = out_dir / fmt::format("conditional_r{}_c{}.pgm", cond_row, cond_col);
          json result = {{"row", cond_row},
                         {"col", cond_col},
                         {"height", hist.height},
                         {"width", hist.width},
                         {"total", hist.total},
                         {"spread", hist.empty() ? json(nullptr) : json(histogram_spread(hist))},
                         {"counts", hist.counts}};
          if (!hist.empty()) result["heatmap"] = to_json(write_heatmap(file, hist), hist.height, hist.width);
          emit(out, result);
        } else {
          json classes = json::array();
          for (const auto& row : angular_report(matches.points, weighting)) {
            classes.push_back({{"class_id", row.class_id}, {"radtan", to_json(row.radtan)}});
          }
          emit(out, {{"overall", to_json(radial_tangential_variance(matches.points))},
                     {"classes", classes}});
        }
      } else if (labels_cmd->parsed()) {
        label_cfg.kind = parse_label_kind(label_kind);
        write_echo({{"kind", label_kind}, {"n_classes", label_cfg.n_classes}, {"seed", label_cfg.seed}});
        const json labels = labels_json(gen_labels(label_cfg), label_cfg);
        write_text(out_dir / "labels.json", labels.dump(2) + "\n");
        emit(out, labels);
      } else if (train_cmd->parsed()) {
        train_cfg.objective = objective == "one_hot" ? Objective::one_hot : Objective::combined;
        label_cfg.kind = parse_label_kind(label_kind);
        label_cfg.n_classes = data_opt.n_classes;
        train_cfg.validate();
        write_echo({{"data", data_json(data_opt)},
                    {"train", to_json(train_cfg)},
                    {"labels", {{"kind", label_kind}, {"seed", label_cfg.seed}}}});
        const Dataset data = make_dataset(data_opt);
        if (data_opt.augment_pad > 0) {
          if (data.image_height == 0) throw std::invalid_argument("--augment-pad needs --dataset bars");
          train_cfg.augment = flip_crop_augmenter(data.image_height, data.image_width, data_opt.augment_pad);
        }
        const auto labels = gen_labels(label_cfg);
        const auto result = train(ToyNet::init(net_config(data_opt, data), train_cfg.seed), data, labels,
                                  train_cfg);
        write_text(out_dir / "metrics.csv", metrics_csv(result.history));
        write_text(out_dir / "labels.json", labels_json(labels, label_cfg).dump(2) + "\n");
        const auto& last = result.history.back();
        emit(out, {{"epochs", result.history.size()},
                   {"final_loss", last.loss},
                   {"final_lr", last.lr},
                   {"train_accuracy", accuracy(result.net, data)},
                   {"angular_error_deg", std::isnan(last.angular_error_deg) ? json(nullptr)
                                                                            : json(last.angular_error_deg)},
                   {"parameters", result.net.parameter_count()},
                   {"checksum", result.net.checksum()}});
      } else if (ablate->parsed()) {
        train_cfg.objective = objective == "one_hot" ? Objective::one_hot : Objective::combined;
        train_cfg.validate();
        AblationConfig cfg;
        cfg.kinds.clear();
        for (const auto& k : kinds) cfg.kinds.push_back(parse_label_kind(k));
        cfg.seeds = seeds;
        cfg.train = train_cfg;
        cfg.test_fraction = test_fraction;
        cfg.control_init = !uncontrolled_init;
        write_echo({{"data", data_json(data_opt)},
                    {"train", to_json(train_cfg)},
                    {"kinds", kinds},
                    {"seeds", seeds},
                    {"test_fraction", test_fraction},
                    {"control_init", cfg.control_init}});
        const Dataset data = make_dataset(data_opt);
        if (data_opt.augment_pad > 0) {
          if (data.image_height == 0) throw std::invalid_argument("--augment-pad needs --dataset bars");
          cfg.train.augment = flip_crop_augmenter(data.image_height, data.image_width, data_opt.augment_pad);
        }
        cfg.net = net_config(data_opt, data);
        const auto result = label_config_ablation(data, cfg);
        write_text(out_dir / "ablation.csv", ablation_csv(result));
        json rows = json::array();
        for (const auto& row : result.rows) {
          rows.push_back({{"kind", to_string(row.kind)},
                          {"mean", row.mean},
                          {"std", row.stddev},
                          {"n_seeds", row.n_seeds}});
        }
        auto best = std::max_element(result.rows.begin(), result.rows.end(),
                                     [](const auto& a, const auto& b) { return a.mean < b.mean; });
        emit(out, {{"rows", rows},
                   {"controlled_init", result.controlled_init},
                   {"controlled_split", result.controlled_split},
                   {"highest", to_string(best->kind)}});
      } else if (report->parsed()) {
        write_echo({{"inputs", report_inputs}});
        std::vector<fs::path> inputs(report_inputs.begin(), report_inputs.end());
        emit(out, bundle_report(inputs, out_dir));
      }
    }
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace u1::cli
