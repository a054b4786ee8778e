#include "conclusive_forest/model_io.hpp"

#include "conclusive_forest/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace cforest {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ModelFormatError(where + ": missing '" + key + "'");
    return *it;
}

FeatureSpec parse_feature(const json& j, std::size_t position) {
    const std::string where = "features[" + std::to_string(position) + "]";
    FeatureSpec f;
    f.id = require(j, "id", where).get<int>();
    f.name = require(j, "name", where).get<std::string>();
    const auto kind = require(j, "kind", where).get<std::string>();
    if (kind == "numeric")
        f.kind = FeatureKind::numeric;
    else if (kind == "one_hot_member")
        f.kind = FeatureKind::one_hot_member;
    else
        throw ModelFormatError(where + ": unknown kind '" + kind + "'");
    if (j.contains("group")) f.group = j["group"].get<std::string>();
    if (j.contains("member_value")) f.member_value = j["member_value"].get<std::string>();
    f.domain_min = require(j, "domain_min", where).get<double>();
    f.domain_max = require(j, "domain_max", where).get<double>();
    return f;
}

Tree parse_tree(const json& j, std::size_t position, Task task) {
    const std::string where = "trees[" + std::to_string(position) + "]";
    const json& nodes = require(j, "nodes", where);
    if (!nodes.is_array() || nodes.empty()) throw ModelFormatError(where + ": nodes must be a non-empty array");

    std::map<long long, int> index_of;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto id = require(nodes[i], "node_id", where).get<long long>();
        if (!index_of.emplace(id, static_cast<int>(i)).second)
            throw ModelFormatError(where + ": duplicate node_id " + std::to_string(id));
    }
    auto resolve = [&](const json& ref) {
        auto it = index_of.find(ref.get<long long>());
        if (it == index_of.end())
            throw ModelFormatError(where + ": dangling node reference " + ref.dump());
        return it->second;
    };

    Tree tree;
    tree.nodes.resize(nodes.size());
    std::vector<bool> has_parent(nodes.size(), false);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const json& n = nodes[i];
        TreeNode& node = tree.nodes[i];
        node.node_id = static_cast<int>(n["node_id"].get<long long>());
        const bool internal = n.contains("feature") || n.contains("threshold") || n.contains("left") ||
                              n.contains("right");
        if (internal && n.contains("leaf_value"))
            throw ModelFormatError(where + ": node " + std::to_string(node.node_id) + " is both leaf and split");
        if (internal) {
            if (n.contains("decision") && n["decision"].get<std::string>() != "<=")
                throw ModelFormatError(where + ": only '<=' splits are supported, got '" +
                                       n["decision"].get<std::string>() + "'");
            node.feature = require(n, "feature", where).get<int>();
            if (node.feature < 0) throw ModelFormatError(where + ": negative feature id");
            node.threshold = require(n, "threshold", where).get<double>();
            node.left = resolve(require(n, "left", where));
            node.right = resolve(require(n, "right", where));
            has_parent[static_cast<std::size_t>(node.left)] = true;
            has_parent[static_cast<std::size_t>(node.right)] = true;
            continue;
        }
        const json& leaf = require(n, "leaf_value", where);
        if (task == Task::regression) {
            if (!leaf.is_number())
                throw ModelFormatError(where + ": regression leaf_value must be a number");
            node.leaf_value = Eigen::VectorXd::Constant(1, leaf.get<double>());
        } else {
            if (!leaf.is_array())
                throw ModelFormatError(where + ": classification leaf_value must be a probability array");
            node.leaf_value.resize(static_cast<Eigen::Index>(leaf.size()));
            for (std::size_t k = 0; k < leaf.size(); ++k)
                node.leaf_value[static_cast<Eigen::Index>(k)] = leaf[k].get<double>();
        }
    }
    int roots = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (!has_parent[i]) {
            tree.root = static_cast<int>(i);
            ++roots;
        }
    if (roots != 1) throw ModelFormatError(where + ": expected exactly one root, found " + std::to_string(roots));
    return tree;
}

}  // namespace

ForestModel load_model(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("malformed model document: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw ModelFormatError("model document must be an object");
        const auto version = require(doc, "format_version", "model").get<std::string>();
        if (version != "1") throw ModelFormatError("unsupported format_version '" + version + "'");
        const Task task = task_from_string(require(doc, "task", "model").get<std::string>());

        std::vector<std::string> classes;
        if (doc.contains("classes")) classes = doc["classes"].get<std::vector<std::string>>();

        std::vector<FeatureSpec> features;
        const json& fs = require(doc, "features", "model");
        for (std::size_t i = 0; i < fs.size(); ++i) features.push_back(parse_feature(fs[i], i));

        std::vector<Tree> trees;
        const json& ts = require(doc, "trees", "model");
        for (std::size_t i = 0; i < ts.size(); ++i) trees.push_back(parse_tree(ts[i], i, task));

        std::optional<std::vector<TreeStats>> stats;
        if (doc.contains("tree_stats")) {
            stats.emplace();
            for (const json& s : doc["tree_stats"])
                stats->push_back({require(s, "min_pred", "tree_stats").get<double>(),
                                  require(s, "max_pred", "tree_stats").get<double>()});
        }
        return ForestModel(task, std::move(classes), std::move(features), std::move(trees), std::move(stats));
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("malformed model document: ") + e.what());
    } catch (const ConfigError& e) {
        throw ModelFormatError(e.what());
    }
}

ForestModel load_model_file(const std::filesystem::path& path) { return load_model(read_file(path)); }

std::string serialize_model(const ForestModel& model, int indent) {
    json doc;
    doc["format_version"] = "1";
    doc["task"] = std::string(to_string(model.task()));
    if (is_classification(model.task())) doc["classes"] = model.classes();

    json features = json::array();
    for (const FeatureSpec& f : model.features()) {
        json j{{"id", f.id},
               {"name", f.name},
               {"kind", f.is_one_hot() ? "one_hot_member" : "numeric"},
               {"domain_min", f.domain_min},
               {"domain_max", f.domain_max}};
        if (f.is_one_hot()) {
            j["group"] = f.group;
            j["member_value"] = f.member_value;
        }
        features.push_back(std::move(j));
    }
    doc["features"] = std::move(features);

    json trees = json::array();
    for (const Tree& tree : model.trees()) {
        json nodes = json::array();
        for (const TreeNode& node : tree.nodes) {
            json n{{"node_id", node.node_id}};
            if (node.is_leaf()) {
                if (model.task() == Task::regression) {
                    n["leaf_value"] = node.leaf_value[0];
                } else {
                    n["leaf_value"] = std::vector<double>(node.leaf_value.data(),
                                                          node.leaf_value.data() + node.leaf_value.size());
                }
            } else {
                n["feature"] = node.feature;
                n["threshold"] = node.threshold;
                n["left"] = tree.nodes[static_cast<std::size_t>(node.left)].node_id;
                n["right"] = tree.nodes[static_cast<std::size_t>(node.right)].node_id;
            }
            nodes.push_back(std::move(n));
        }
        trees.push_back(json{{"nodes", std::move(nodes)}});
    }
    doc["trees"] = std::move(trees);

    if (model.task() == Task::regression) {
        json stats = json::array();
        for (const TreeStats& s : model.tree_stats())
            stats.push_back(json{{"min_pred", s.min_pred}, {"max_pred", s.max_pred}});
        doc["tree_stats"] = std::move(stats);
    }
    return doc.dump(indent);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << contents;
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace cforest
