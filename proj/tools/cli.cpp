#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "oatlab/verify.hpp"

namespace oatlab::cli {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

/// Real knobs are stored as float; echo the shortest decimal that parses
/// back to the same float, so summaries show 0.001 rather than its double
/// expansion.
json json_real(float v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", double(v));
    if (std::strtof(buf, nullptr) != v) {
        std::snprintf(buf, sizeof(buf), "%.9g", double(v));
    }
    return json::parse(buf);
}

void require_known_keys(const json& j, const std::vector<std::string>& allowed,
                        const std::string& where) {
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ConfigError("unknown field '" + where + item.key() + "'");
        }
    }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw ConfigError("missing field '" + where + key + "'");
    }
    const json& v = j.at(key);
    // nlohmann casts negative integers into unsigned targets silently
    if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ConfigError("field '" + where + key + "' must be a non-negative integer");
        }
    }
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field '" + where + key + "' has the wrong type");
    }
}

template <>
std::vector<std::size_t> get_field<std::vector<std::size_t>>(const json& j, const char* key,
                                                             const std::string& where) {
    if (!j.contains(key)) {
        throw ConfigError("missing field '" + where + key + "'");
    }
    const json& v = j.at(key);
    if (!v.is_array()) {
        throw ConfigError("field '" + where + key + "' must be an array");
    }
    std::vector<std::size_t> out;
    for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 0) {
            throw ConfigError("field '" + where + key +
                              "' must hold non-negative integers");
        }
        out.push_back(e.get<std::size_t>());
    }
    return out;
}

template <typename T>
T get_field_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) {
        return fallback;
    }
    return get_field<T>(j, key, where);
}

TrainMode parse_mode(const std::string& s) {
    if (s == "conventional") {
        return TrainMode::Conventional;
    }
    if (s == "oat") {
        return TrainMode::Oat;
    }
    throw ConfigError("field 'mode': expected \"conventional\" or \"oat\", got \"" + s + "\"");
}

EvalMode parse_eval_mode(const std::string& s) {
    if (s == "conventional") {
        return EvalMode::Conventional;
    }
    if (s == "oat_batched") {
        return EvalMode::OatBatched;
    }
    if (s == "oat_single") {
        return EvalMode::OatSingle;
    }
    throw ConfigError("field 'eval_mode': unknown value \"" + s + "\"");
}

const char* mode_name(TrainMode m) {
    return m == TrainMode::Conventional ? "conventional" : "oat";
}

const char* eval_mode_name(EvalMode m) {
    switch (m) {
    case EvalMode::Conventional: return "conventional";
    case EvalMode::OatBatched: return "oat_batched";
    case EvalMode::OatSingle: return "oat_single";
    }
    return "?";
}

DatasetSpec parse_dataset(const json& j) {
    DatasetSpec spec;
    const std::string kind = get_field<std::string>(j, "kind", "dataset.");
    if (kind == "blobs") {
        require_known_keys(j, {"kind", "classes", "per_class", "dim", "spread", "seed"},
                           "dataset.");
        spec.kind = DatasetSpec::Kind::Blobs;
        spec.classes = get_field_or<std::size_t>(j, "classes", 3, "dataset.");
        spec.per_class = get_field_or<std::size_t>(j, "per_class", 100, "dataset.");
        spec.dim = get_field_or<std::size_t>(j, "dim", 2, "dataset.");
        spec.spread = float(get_field_or<double>(j, "spread", 1.0, "dataset."));
        spec.seed = get_field_or<std::uint32_t>(j, "seed", 0, "dataset.");
    } else if (kind == "mnist") {
        require_known_keys(
            j, {"kind", "train_images", "train_labels", "test_images", "test_labels"},
            "dataset.");
        spec.kind = DatasetSpec::Kind::Mnist;
        spec.train_images = get_field<std::string>(j, "train_images", "dataset.");
        spec.train_labels = get_field<std::string>(j, "train_labels", "dataset.");
        spec.test_images = get_field<std::string>(j, "test_images", "dataset.");
        spec.test_labels = get_field<std::string>(j, "test_labels", "dataset.");
    } else if (kind == "cifar10") {
        require_known_keys(j, {"kind", "dir"}, "dataset.");
        spec.kind = DatasetSpec::Kind::Cifar10;
        spec.dir = get_field<std::string>(j, "dir", "dataset.");
    } else {
        throw ConfigError("field 'dataset.kind': unknown value \"" + kind + "\"");
    }
    return spec;
}

ModelSpec parse_model(const json& j) {
    ModelSpec spec;
    const std::string kind = get_field<std::string>(j, "kind", "model.");
    if (kind == "mlp") {
        require_known_keys(j, {"kind", "hidden"}, "model.");
        spec.kind = ModelSpec::Kind::Mlp;
        spec.hidden = get_field_or<std::vector<std::size_t>>(j, "hidden", {16}, "model.");
    } else if (kind == "lightweight_cifar") {
        require_known_keys(j, {"kind"}, "model.");
        spec.kind = ModelSpec::Kind::LightweightCifar;
    } else {
        throw ConfigError("field 'model.kind': unknown value \"" + kind + "\"");
    }
    return spec;
}

void validate_spec(const RunSpec& spec) {
    try {
        validate(spec.train);
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    if (spec.dataset.kind == DatasetSpec::Kind::Blobs) {
        if (spec.dataset.classes < 2 || spec.dataset.dim < 2 || spec.dataset.per_class < 2 ||
            spec.dataset.spread < 0.0f) {
            throw ConfigError("dataset: blobs need classes >= 2, dim >= 2, per_class >= 2 "
                              "and spread >= 0");
        }
    }
    if (spec.dataset.kind == DatasetSpec::Kind::Mnist) {
        for (const auto& p : {spec.dataset.train_images, spec.dataset.train_labels,
                              spec.dataset.test_images, spec.dataset.test_labels}) {
            if (!std::filesystem::exists(p)) {
                throw ConfigError("dataset path does not exist: " + p.string());
            }
        }
    }
    if (spec.dataset.kind == DatasetSpec::Kind::Cifar10 &&
        !std::filesystem::is_directory(spec.dataset.dir)) {
        throw ConfigError("dataset directory does not exist: " + spec.dataset.dir.string());
    }
    if (spec.model.kind == ModelSpec::Kind::Mlp) {
        for (std::size_t h : spec.model.hidden) {
            if (h == 0) {
                throw ConfigError("field 'model.hidden': sizes must be positive");
            }
        }
    }
}

ordered_json dataset_json(const DatasetSpec& spec) {
    ordered_json j;
    switch (spec.kind) {
    case DatasetSpec::Kind::Blobs:
        j["kind"] = "blobs";
        j["classes"] = spec.classes;
        j["per_class"] = spec.per_class;
        j["dim"] = spec.dim;
        j["spread"] = json_real(spec.spread);
        j["seed"] = spec.seed;
        break;
    case DatasetSpec::Kind::Mnist:
        j["kind"] = "mnist";
        j["train_images"] = spec.train_images.string();
        j["train_labels"] = spec.train_labels.string();
        j["test_images"] = spec.test_images.string();
        j["test_labels"] = spec.test_labels.string();
        break;
    case DatasetSpec::Kind::Cifar10:
        j["kind"] = "cifar10";
        j["dir"] = spec.dir.string();
        break;
    }
    return j;
}

ordered_json model_json(const ModelSpec& spec) {
    ordered_json j;
    if (spec.kind == ModelSpec::Kind::Mlp) {
        j["kind"] = "mlp";
        j["hidden"] = spec.hidden;
    } else {
        j["kind"] = "lightweight_cifar";
    }
    return j;
}

/// Full effective configuration, defaults included, so a run can be
/// reproduced from its summary alone.
ordered_json config_json(const RunSpec& spec) {
    ordered_json j;
    j["dataset"] = dataset_json(spec.dataset);
    j["model"] = model_json(spec.model);
    j["mode"] = mode_name(spec.train.mode);
    j["total_epochs"] = spec.train.total_epochs;
    j["pretrain_epochs"] = spec.train.pretrain_epochs;
    j["batch_size"] = spec.train.batch_size;
    j["lr"] = json_real(spec.train.lr);
    j["momentum"] = json_real(spec.train.momentum);
    j["seed"] = spec.train.seed;
    j["eval_mode"] = eval_mode_name(spec.train.eval_mode);
    j["eval_batch_size"] = spec.train.effective_eval_batch_size();
    j["output_dir"] = spec.output_dir.string();
    return j;
}

void write_metrics_csv(const History& history, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) {
        throw FormatError("cannot write " + path.string());
    }
    os << "epoch,phase,train_loss,test_accuracy,epoch_train_seconds,eval_seconds\n";
    for (const EpochMetrics& m : history.epochs) {
        os << m.epoch << ',' << phase_name(m.phase) << ',' << fmt("%.10g", m.train_loss) << ','
           << fmt("%.10g", m.test_accuracy) << ',' << fmt("%.6f", m.train_seconds) << ','
           << fmt("%.6f", m.eval_seconds) << '\n';
    }
}

void write_summary_json(const RunSpec& spec, const History& history, double total_seconds,
                        const std::filesystem::path& path) {
    ordered_json j;
    j["config"] = config_json(spec);
    j["final_accuracy"] = history.final_accuracy;
    j["best_accuracy"] = history.best_accuracy;
    j["total_seconds"] = total_seconds;
    std::ofstream os(path);
    if (!os) {
        throw FormatError("cannot write " + path.string());
    }
    os << j.dump(2) << '\n';
}

/// Loads data, builds the model, trains, and writes outputs into out_dir.
History execute_run(const RunSpec& spec, const std::filesystem::path& out_dir,
                    std::ostream& log) {
    const auto started = std::chrono::steady_clock::now();
    auto [train_ds, test_ds] = load_datasets(spec.dataset);
    Network<float> net;
    try {
        net = build_network(spec.model, train_ds, spec.train.seed);
    } catch (const ShapeError& e) {
        throw ConfigError(std::string("model does not fit dataset: ") + e.what());
    }
    History history = run_training(net, train_ds, test_ds, spec.train);
    const double total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    std::filesystem::create_directories(out_dir);
    write_metrics_csv(history, out_dir / "metrics.csv");
    write_summary_json(spec, history, total_seconds, out_dir / "summary.json");
    log << "wrote " << (out_dir / "metrics.csv").string() << " (final accuracy "
        << fmt("%.4f", history.final_accuracy) << ", best "
        << fmt("%.4f", history.best_accuracy) << ")\n";
    return history;
}

} // namespace

RunSpec parse_run_spec_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    require_known_keys(j,
                       {"dataset", "model", "mode", "total_epochs", "pretrain_epochs",
                        "batch_size", "lr", "momentum", "seed", "eval_mode",
                        "eval_batch_size", "output_dir"},
                       "");
    RunSpec spec;
    if (!j.contains("dataset") || !j.at("dataset").is_object()) {
        throw ConfigError("missing or non-object field 'dataset'");
    }
    if (!j.contains("model") || !j.at("model").is_object()) {
        throw ConfigError("missing or non-object field 'model'");
    }
    spec.dataset = parse_dataset(j.at("dataset"));
    spec.model = parse_model(j.at("model"));
    spec.train.mode = parse_mode(get_field_or<std::string>(j, "mode", "conventional", ""));
    spec.train.total_epochs = get_field_or<std::size_t>(j, "total_epochs", 100, "");
    spec.train.pretrain_epochs = get_field_or<std::size_t>(j, "pretrain_epochs", 10, "");
    spec.train.batch_size = get_field_or<std::size_t>(j, "batch_size", 32, "");
    spec.train.lr = float(get_field_or<double>(j, "lr", 0.001, ""));
    spec.train.momentum = float(get_field_or<double>(j, "momentum", 0.9, ""));
    spec.train.seed = get_field_or<std::uint32_t>(j, "seed", 0, "");
    spec.train.eval_batch_size = get_field_or<std::size_t>(j, "eval_batch_size", 0, "");
    if (j.contains("eval_mode")) {
        spec.train.eval_mode = parse_eval_mode(get_field<std::string>(j, "eval_mode", ""));
        spec.eval_mode_explicit = true;
    } else {
        spec.train.eval_mode = spec.train.mode == TrainMode::Oat ? EvalMode::OatBatched
                                                                 : EvalMode::Conventional;
    }
    spec.output_dir = get_field_or<std::string>(j, "output_dir", "oat_run", "");
    return spec;
}

RunSpec parse_run_spec_file(const std::filesystem::path& config_file) {
    std::ifstream is(config_file);
    if (!is) {
        throw ConfigError("cannot open config file: " + config_file.string());
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_run_spec_json(ss.str());
}

std::pair<Dataset, Dataset> load_datasets(const DatasetSpec& spec) {
    switch (spec.kind) {
    case DatasetSpec::Kind::Blobs:
        return synth_blobs(spec.classes, spec.per_class, spec.dim, spec.spread, spec.seed);
    case DatasetSpec::Kind::Mnist: {
        Dataset train = load_mnist_idx(spec.train_images, spec.train_labels);
        Dataset test = load_mnist_idx(spec.test_images, spec.test_labels, train.norm);
        return {std::move(train), std::move(test)};
    }
    case DatasetSpec::Kind::Cifar10:
        return load_cifar10(spec.dir);
    }
    throw ConfigError("unreachable dataset kind");
}

Network<float> build_network(const ModelSpec& model, const Dataset& train,
                             std::uint32_t seed) {
    const std::vector<std::size_t> sample_shape(train.inputs.shape().begin() + 1,
                                                train.inputs.shape().end());
    std::vector<LayerSpec> layers;
    if (model.kind == ModelSpec::Kind::LightweightCifar) {
        layers = {LayerSpec::conv2d(3, 6, 5),   LayerSpec::relu(), LayerSpec::maxpool2x2(),
                  LayerSpec::conv2d(6, 16, 5),  LayerSpec::relu(), LayerSpec::maxpool2x2(),
                  LayerSpec::flatten(),         LayerSpec::dense(400, 128),
                  LayerSpec::relu(),            LayerSpec::dense(128, 64),
                  LayerSpec::relu(),            LayerSpec::dense(64, train.class_count)};
    } else {
        std::size_t flat = 1;
        for (std::size_t d : sample_shape) {
            flat *= d;
        }
        if (sample_shape.size() > 1) {
            layers.push_back(LayerSpec::flatten());
        }
        std::size_t cur = flat;
        for (std::size_t h : model.hidden) {
            layers.push_back(LayerSpec::dense(cur, h));
            layers.push_back(LayerSpec::relu());
            cur = h;
        }
        layers.push_back(LayerSpec::dense(cur, train.class_count));
    }
    return init_network<float>(layers, train.class_count, seed, sample_shape);
}

int cmd_train(const std::filesystem::path& config_file,
              const std::optional<std::filesystem::path>& out_override,
              const std::optional<std::uint32_t>& seed_override, std::ostream& log) {
    RunSpec spec;
    try {
        spec = parse_run_spec_file(config_file);
        if (out_override) {
            spec.output_dir = *out_override;
        }
        if (seed_override) {
            spec.train.seed = *seed_override;
        }
        validate_spec(spec);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
    try {
        execute_run(spec, spec.output_dir, log);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const Error& e) {
        log << "data error: " << e.what() << '\n';
        return kExitDataError;
    } catch (const std::exception& e) {
        log << "data error: " << e.what() << '\n';
        return kExitDataError;
    }
    return kExitOk;
}

namespace {

struct SweepCell {
    std::string axis_value; // "-" for the shared baseline row
    TrainMode mode;
    RunSpec spec;
    std::string label;
};

std::vector<std::string> split_csv_list(const std::string& values_csv) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(values_csv);
    while (std::getline(ss, cur, ',')) {
        if (!cur.empty()) {
            out.push_back(cur);
        }
    }
    return out;
}

/// Applies one axis value to a cell spec; throws ConfigError on a bad value.
void apply_axis(RunSpec& spec, const std::string& axis, const std::string& value) {
    try {
        if (axis == "lr") {
            spec.train.lr = std::stof(value);
        } else if (axis == "batch_size") {
            spec.train.batch_size = std::stoul(value);
        } else if (axis == "pretrain_epochs") {
            spec.train.pretrain_epochs = std::stoul(value);
        }
    } catch (const std::exception&) {
        throw ConfigError("axis value '" + value + "' is not a number");
    }
}

} // namespace

int cmd_sweep(const std::filesystem::path& config_file, const std::string& axis,
              const std::string& values_csv,
              const std::optional<std::filesystem::path>& out_override, std::ostream& log) {
    if (axis != "lr" && axis != "batch_size" && axis != "pretrain_epochs") {
        log << "config error: unknown sweep axis '" << axis << "'\n";
        return kExitConfigError;
    }
    const std::vector<std::string> values = split_csv_list(values_csv);
    if (values.empty()) {
        log << "config error: sweep needs at least one value\n";
        return kExitConfigError;
    }
    RunSpec base;
    try {
        base = parse_run_spec_file(config_file);
        if (out_override) {
            base.output_dir = *out_override;
        }
        validate_spec(base);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }

    // One seed for every cell: axis effects are not confounded with
    // initialization noise.
    std::vector<SweepCell> cells;
    auto make_cell = [&](const std::string& axis_value, TrainMode mode) {
        SweepCell cell;
        cell.axis_value = axis_value;
        cell.mode = mode;
        cell.spec = base;
        cell.spec.train.mode = mode;
        if (!cell.spec.eval_mode_explicit) {
            cell.spec.train.eval_mode =
                mode == TrainMode::Oat ? EvalMode::OatBatched : EvalMode::Conventional;
        }
        if (axis_value != "-") {
            apply_axis(cell.spec, axis, axis_value);
        }
        cell.label = (axis_value == "-" ? std::string("baseline") : axis + "=" + axis_value) +
                     "_" + mode_name(mode);
        cell.spec.output_dir = base.output_dir / cell.label;
        return cell;
    };
    try {
        if (axis == "pretrain_epochs") {
            // pretraining only affects oat runs; one conventional baseline is shared
            cells.push_back(make_cell("-", TrainMode::Conventional));
            for (const auto& v : values) {
                cells.push_back(make_cell(v, TrainMode::Oat));
            }
        } else {
            for (const auto& v : values) {
                cells.push_back(make_cell(v, TrainMode::Conventional));
                cells.push_back(make_cell(v, TrainMode::Oat));
            }
        }
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }

    std::pair<Dataset, Dataset> data;
    try {
        data = load_datasets(base.dataset);
    } catch (const Error& e) {
        log << "data error: " << e.what() << '\n';
        return kExitDataError;
    }

    std::filesystem::create_directories(base.output_dir);
    std::ofstream csv(base.output_dir / "sweep.csv");
    if (!csv) {
        log << "data error: cannot write sweep.csv\n";
        return kExitDataError;
    }
    csv << "axis_value,mode,final_accuracy,best_accuracy,status\n";
    for (SweepCell& cell : cells) {
        log << "cell " << cell.label << ":\n";
        std::string status = "ok";
        std::string final_acc;
        std::string best_acc;
        try {
            validate_spec(cell.spec);
            Network<float> net;
            try {
                net = build_network(cell.spec.model, data.first, cell.spec.train.seed);
            } catch (const ShapeError& e) {
                throw ConfigError(std::string("model does not fit dataset: ") + e.what());
            }
            const auto started = std::chrono::steady_clock::now();
            History history = run_training(net, data.first, data.second, cell.spec.train);
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
            std::filesystem::create_directories(cell.spec.output_dir);
            write_metrics_csv(history, cell.spec.output_dir / "metrics.csv");
            write_summary_json(cell.spec, history, seconds,
                               cell.spec.output_dir / "summary.json");
            final_acc = fmt("%.10g", history.final_accuracy);
            best_acc = fmt("%.10g", history.best_accuracy);
            log << "  final accuracy " << fmt("%.4f", history.final_accuracy) << '\n';
        } catch (const ConfigError& e) {
            status = "config_error";
            log << "  config error: " << e.what() << '\n';
        } catch (const std::exception& e) {
            status = "data_error";
            log << "  data error: " << e.what() << '\n';
        }
        csv << cell.axis_value << ',' << mode_name(cell.mode) << ',' << final_acc << ','
            << best_acc << ',' << status << '\n';
    }
    log << "wrote " << (base.output_dir / "sweep.csv").string() << '\n';
    return kExitOk;
}

int cmd_verify(std::ostream& out) {
    const auto results = verify::run_all();
    std::size_t failed = 0;
    for (const auto& r : results) {
        out << (r.passed ? "PASS" : "FAIL") << ' ' << r.name;
        if (!r.detail.empty()) {
            out << " (" << r.detail << ')';
        }
        out << '\n';
        if (!r.passed) {
            ++failed;
        }
    }
    if (failed > 0) {
        out << failed << " of " << results.size() << " properties failed\n";
        return kExitVerifyFailed;
    }
    out << "all " << results.size() << " properties passed\n";
    return kExitOk;
}

} // namespace oatlab::cli
