#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fieldloom/pipeline.hpp"

// Exit codes: 0 success, 2 validation error, 3 missing upstream artifact.
int main(int argc, char** argv) {
    CLI::App app{"fieldloom - crop field inventory pipeline"};
    app.require_subcommand(1);

    const std::vector<std::string> stages = {"scene",  "mosaic",   "segment", "merge",
                                             "filter", "evaluate", "aggregate"};
    std::string config_path;
    std::vector<std::string> overrides;
    std::string chosen;
    int n_trees = -1, mtry = -1;
    long long forest_seed = -1;
    double threshold = -1;
    for (const auto& name : stages) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
        sub->add_option("--config", config_path, "pipeline config JSON")->required();
        sub->add_option("--override", overrides, "key=value config override (repeatable)");
        if (name == "filter") {
            sub->add_option("--n-trees", n_trees, "forest size");
            sub->add_option("--mtry", mtry, "features tried per split");
            sub->add_option("--seed", forest_seed, "forest training seed");
            sub->add_option("--threshold", threshold, "field probability cutoff");
        }
        sub->callback([&chosen, name] { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);

    if (n_trees >= 0) overrides.push_back("filter.n_trees=" + std::to_string(n_trees));
    if (mtry >= 0) overrides.push_back("filter.mtry=" + std::to_string(mtry));
    if (forest_seed >= 0) overrides.push_back("filter.seed=" + std::to_string(forest_seed));
    if (threshold >= 0) overrides.push_back("filter.threshold=" + std::to_string(threshold));

    try {
        fieldloom::PipelineConfig cfg = fieldloom::load_config(config_path);
        for (const auto& kv : overrides) fieldloom::apply_override(cfg, kv);
        fieldloom::run_stage(chosen, cfg);
    } catch (const fieldloom::MissingDependencyError& e) {
        fieldloom::log_event(chosen, "error", {{"kind", "missing_dependency"}, {"message", e.what()}});
        return 3;
    } catch (const std::invalid_argument& e) {
        fieldloom::log_event(chosen, "error", {{"kind", "validation"}, {"message", e.what()}});
        return 2;
    } catch (const std::exception& e) {
        fieldloom::log_event(chosen, "error", {{"kind", "runtime"}, {"message", e.what()}});
        return 1;
    }
    return 0;
}
