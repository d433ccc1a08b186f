#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dimsheet/engine.hpp"
#include "dimsheet/gridvm.hpp"
#include "dimsheet/layout.hpp"
#include "dimsheet/metrics.hpp"
#include "dimsheet/parser.hpp"

namespace {

// Exit codes: 0 ok, 1 parse error, 2 validation/preset/override error,
// 3 I/O error, 4 evaluation error, 5 verification mismatch, 64 usage.
constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitEval = 4;
constexpr int kExitVerify = 5;

struct ModelLoadError {
    int code;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << path << "\n";
        throw ModelLoadError{kExitIo};
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        throw ModelLoadError{kExitIo};
    }
    out << content;
}

void print_diagnostics(const std::vector<dimsheet::ParseDiagnostic>& diagnostics) {
    for (const auto& d : diagnostics) {
        std::cerr << (d.severity == dimsheet::IssueSeverity::Error ? "error" : "warning") << " at "
                  << d.span.line << ':' << d.span.column << ": " << d.message << "\n";
    }
}

dimsheet::ValidatedModel load_model(const std::string& path) {
    std::string text = read_file(path);
    dimsheet::ParseResult parsed = dimsheet::parse_model(text);
    print_diagnostics(parsed.diagnostics);
    if (!parsed.ok()) throw ModelLoadError{kExitParse};
    try {
        return dimsheet::validate(*parsed.model);
    } catch (const dimsheet::ValidationError& e) {
        for (const auto& issue : e.issues()) {
            std::cerr << "error: " << (issue.variable.empty() ? "" : "[" + issue.variable + "] ")
                      << issue.message << "\n";
        }
        throw ModelLoadError{kExitValidation};
    }
}

dimsheet::Overrides parse_overrides(const std::vector<std::string>& settings) {
    dimsheet::Overrides overrides;
    for (const auto& setting : settings) {
        auto eq = setting.rfind('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "error: --set expects NAME=VALUE, got '" << setting << "'\n";
            throw ModelLoadError{kExitValidation};
        }
        std::string name = setting.substr(0, eq);
        char* end = nullptr;
        double value = std::strtod(setting.c_str() + eq + 1, &end);
        if (end == setting.c_str() + eq + 1 || *end != '\0' || !std::isfinite(value)) {
            std::cerr << "error: '" << setting.substr(eq + 1) << "' is not a finite number\n";
            throw ModelLoadError{kExitValidation};
        }
        overrides[name] = value;
    }
    return overrides;
}

dimsheet::LayoutPlan resolve_plan(const dimsheet::ValidatedModel& model,
                                  const std::string& preset, const std::string& plan_path) {
    try {
        if (!plan_path.empty()) {
            return dimsheet::plan_from_json(read_file(plan_path), model.model);
        }
        return dimsheet::preset_plan(model, preset);
    } catch (const dimsheet::LayoutError& e) {
        std::cerr << "error: " << e.what() << "\n";
        throw ModelLoadError{kExitValidation};
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: bad plan file: " << e.what() << "\n";
        throw ModelLoadError{kExitParse};
    }
}

int cmd_check(const std::string& model_path) {
    dimsheet::ValidatedModel model = load_model(model_path);
    for (const auto& warning : model.warnings) {
        std::cerr << "warning: [" << warning.variable << "] " << warning.message << "\n";
    }
    std::cout << model.model.variables.size() << " variables, " << model.model.dimensions.size()
              << " dimensions, ok\n";
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::vector<std::string>& settings,
             const std::string& out, const std::string& format) {
    dimsheet::ValidatedModel model = load_model(model_path);
    dimsheet::Overrides overrides = parse_overrides(settings);
    dimsheet::ValueStore store;
    try {
        store = dimsheet::eval_model(model, overrides);
    } catch (const dimsheet::EngineError& e) {
        if (e.kind() == dimsheet::EngineErrorKind::BadOverride) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitValidation;
        }
        std::cerr << "error: " << e.what() << "\n";
        return kExitEval;
    }
    if (format == "csv") {
        if (out.empty()) {
            std::cerr << "error: --format csv needs --out DIR\n";
            return kExitIo;
        }
        std::filesystem::create_directories(out);
        for (const auto& var : model.model.variables) {
            const dimsheet::DimArray& array = store.at(var.name);
            std::ostringstream csv;
            auto names = model.model.dim_names(array.dims);
            for (const auto& name : names) csv << name << ',';
            csv << "value\n";
            std::vector<std::size_t> coord(array.dims.size(), 0);
            std::size_t flat = 0;
            for (;;) {
                for (std::size_t i = 0; i < coord.size(); ++i) {
                    csv << model.model.dimension(array.dims.indices()[i]).instances[coord[i]]
                        << ',';
                }
                char buffer[64];
                std::snprintf(buffer, sizeof(buffer), "%.10g", array.values[flat]);
                csv << buffer << '\n';
                if (++flat >= array.values.size()) break;
                std::size_t axis = coord.size();
                while (axis-- > 0) {
                    if (++coord[axis] < array.shape[axis]) break;
                    coord[axis] = 0;
                }
            }
            std::string safe = var.name;
            for (auto& c : safe) {
                if (c == '/' || c == ' ') c = '_';
            }
            write_output(out + "/" + safe + ".csv", csv.str());
        }
        return kExitOk;
    }
    write_output(out, dimsheet::value_store_to_json(store, model.model));
    return kExitOk;
}

int cmd_layout(const std::string& model_path, const std::string& preset,
               const std::string& plan_path, const std::string& out, const std::string& format) {
    dimsheet::ValidatedModel model = load_model(model_path);
    dimsheet::LayoutPlan plan = resolve_plan(model, preset, plan_path);
    dimsheet::GridDoc doc;
    try {
        doc = dimsheet::compile_model(model, plan);
    } catch (const dimsheet::LayoutError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    if (format == "csv") {
        if (out.empty()) {
            std::cerr << "error: --format csv needs --out DIR\n";
            return kExitIo;
        }
        std::filesystem::create_directories(out);
        for (const auto& [sheet, content] : dimsheet::grid_to_csv(doc)) {
            write_output(out + "/" + sheet + ".csv", content);
        }
        return kExitOk;
    }
    write_output(out, dimsheet::grid_to_json(doc));
    return kExitOk;
}

std::vector<std::size_t> unflatten(const dimsheet::DimArray& array, std::size_t flat) {
    std::vector<std::size_t> coord(array.shape.size(), 0);
    for (std::size_t i = array.shape.size(); i-- > 0;) {
        coord[i] = flat % array.shape[i];
        flat /= array.shape[i];
    }
    return coord;
}

dimsheet::GridDoc load_grid(const std::string& path) {
    if (std::filesystem::is_directory(path)) {
        dimsheet::GridDoc doc;
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(path)) {
            if (entry.path().extension() == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            doc.sheets.push_back(
                dimsheet::sheet_from_csv(file.stem().string(), read_file(file.string())));
        }
        return doc;
    }
    return dimsheet::grid_from_json(read_file(path));
}

int cmd_verify(const std::string& model_path, const std::string& preset,
               const std::string& plan_path, const std::vector<std::string>& settings,
               const std::string& grid_path, const std::string& out) {
    dimsheet::ValidatedModel model = load_model(model_path);
    dimsheet::Overrides overrides = parse_overrides(settings);
    dimsheet::LayoutPlan plan = resolve_plan(model, preset, plan_path);

    dimsheet::ValueStore expected;
    dimsheet::ValueStore actual;
    try {
        expected = dimsheet::eval_model(model, overrides);
        dimsheet::GridDoc doc =
            grid_path.empty() ? dimsheet::compile_model(model, plan) : load_grid(grid_path);
        dimsheet::override_grid_inputs(doc, plan, model.model, overrides);
        actual = dimsheet::extract_variable_values(plan, model.model, dimsheet::eval_grid(doc));
    } catch (const dimsheet::EngineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == dimsheet::EngineErrorKind::BadOverride ? kExitValidation : kExitEval;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEval;
    }

    bool ok = true;
    for (const auto& var : model.model.variables) {
        const dimsheet::DimArray& engine_values = expected.at(var.name);
        const dimsheet::DimArray& grid_values = actual.at(var.name);
        double worst = 0.0;
        std::size_t worst_index = 0;
        for (std::size_t i = 0; i < engine_values.values.size(); ++i) {
            double scale = std::max(std::abs(engine_values.values[i]), 1e-300);
            double err = std::abs(grid_values.values[i] - engine_values.values[i]) / scale;
            if (err > worst) {
                worst = err;
                worst_index = i;
            }
        }
        std::cout << var.name << ": max rel err " << worst;
        if (worst > 0) {
            dimsheet::CellAddress address = dimsheet::cell_address(
                plan, model.model, var.name, unflatten(engine_values, worst_index));
            std::cout << " at " << address.sheet << '!'
                      << dimsheet::cell_name(address.row, address.col);
        }
        std::cout << "\n";
        if (!(worst <= 1e-9)) ok = false;
    }
    if (!out.empty()) {
        write_output(out, dimsheet::value_store_to_json(actual, model.model));
    }
    if (!ok) {
        std::cerr << "error: grid evaluation disagrees with the engine\n";
        return kExitVerify;
    }
    return kExitOk;
}

int cmd_metrics(const std::string& model_path, const std::string& presets_arg,
                const std::string& out, const std::string& format) {
    dimsheet::ValidatedModel model = load_model(model_path);
    std::vector<std::string> presets;
    std::stringstream stream(presets_arg);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (!item.empty()) presets.push_back(item);
    }
    std::vector<dimsheet::StrategyReport> reports;
    try {
        reports = dimsheet::compare_presets(model, presets);
    } catch (const dimsheet::LayoutError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    if (format == "text") {
        write_output(out, dimsheet::render_comparison(reports, model));
    } else {
        write_output(out, dimsheet::reports_to_json(reports));
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compiler and evaluator for multidimensional spreadsheet models"};
    app.require_subcommand(1);

    std::string model_path, preset, plan_path, presets_arg, out, format = "json", grid_path;
    std::vector<std::string> settings;

    auto add_common = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("model", model_path, "model file (.dim)")->required();
        if (with_out) {
            cmd->add_option("--out", out, "output path ('-' for stdout)");
            cmd->add_option("--format", format, "json|csv|text")
                ->check(CLI::IsMember({"json", "csv", "text"}));
        }
    };

    CLI::App* check = app.add_subcommand("check", "parse and validate a model");
    add_common(check, false);

    CLI::App* eval = app.add_subcommand("eval", "evaluate all variables");
    add_common(eval, true);
    eval->add_option("--set", settings, "override a scalar input, NAME=VALUE");

    CLI::App* layout = app.add_subcommand("layout", "compile the model onto grids");
    add_common(layout, true);
    layout->add_option("--preset", preset, "layout preset name");
    layout->add_option("--plan", plan_path, "layout plan JSON file");

    CLI::App* verify = app.add_subcommand("verify", "compile, evaluate the grid, diff vs engine");
    add_common(verify, false);
    verify->add_option("--out", out, "write the grid-extracted value dump here");
    verify->add_option("--preset", preset, "layout preset name");
    verify->add_option("--plan", plan_path, "layout plan JSON file");
    verify->add_option("--set", settings, "override a scalar input, NAME=VALUE");
    verify->add_option("--grid", grid_path, "evaluate this grid JSON instead of compiling");

    CLI::App* metrics = app.add_subcommand("metrics", "formula complexity per layout strategy");
    add_common(metrics, true);
    metrics->add_option("--presets", presets_arg, "comma-separated preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    try {
        if (app.got_subcommand(check)) return cmd_check(model_path);
        if (app.got_subcommand(eval)) return cmd_eval(model_path, settings, out, format);
        if (app.got_subcommand(layout)) {
            if (preset.empty() && plan_path.empty()) {
                std::cerr << "error: layout needs --preset or --plan\n";
                return 64;
            }
            return cmd_layout(model_path, preset, plan_path, out, format);
        }
        if (app.got_subcommand(verify)) {
            if (preset.empty() && plan_path.empty()) {
                std::cerr << "error: verify needs --preset or --plan\n";
                return 64;
            }
            return cmd_verify(model_path, preset, plan_path, settings, grid_path, out);
        }
        if (app.got_subcommand(metrics)) {
            return cmd_metrics(model_path, presets_arg, out, format);
        }
    } catch (const ModelLoadError& e) {
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEval;
    }
    return 64;
}
