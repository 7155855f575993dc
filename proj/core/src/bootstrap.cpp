#include <algorithm>
#include <atomic>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

#include "tsdid/error.hpp"
#include "tsdid/inference.hpp"

namespace tsdid {

PanelDataset resample_clusters(const PanelDataset& data, std::span<const int> draws) {
    const std::size_t n_clusters = data.n_clusters();
    const auto cluster_of_row = data.cluster_of_row();

    std::vector<int> cluster_of_unit(data.n_units(), -1);
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        int& c = cluster_of_unit[static_cast<std::size_t>(data.row(i).unit)];
        if (c == -1) {
            c = cluster_of_row[i];
        } else if (c != cluster_of_row[i]) {
            throw Error(ErrorCode::InvalidArgument, "cluster bootstrap requires every unit to lie within one cluster (unit '" +
                                                        data.unit_label(data.row(i).unit) + "' spans several)");
        }
    }

    std::vector<std::size_t> start(n_clusters + 1, 0);
    for (int c : cluster_of_row) ++start[static_cast<std::size_t>(c) + 1];
    for (std::size_t c = 0; c < n_clusters; ++c) start[c + 1] += start[c];
    std::vector<std::size_t> rows_by_cluster(data.n_rows());
    {
        std::vector<std::size_t> fill(start.begin(), start.end() - 1);
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            rows_by_cluster[fill[static_cast<std::size_t>(cluster_of_row[i])]++] = i;
        }
    }

    std::size_t total = 0;
    for (int c : draws) {
        if (c < 0 || static_cast<std::size_t>(c) >= n_clusters) throw Error(ErrorCode::InvalidArgument, "cluster draw out of range");
        total += start[static_cast<std::size_t>(c) + 1] - start[static_cast<std::size_t>(c)];
    }

    PanelColumns cols;
    cols.unit.reserve(total);
    cols.time.reserve(total);
    cols.outcome.reserve(total);
    cols.group.reserve(total);
    cols.cluster.reserve(total);
    if (data.has_weight_column()) cols.weight.reserve(total);
    cols.covariate_names = data.covariate_names();
    cols.covariates.resize(data.n_covariates());
    const auto weights = data.weights();

    for (std::size_t b = 0; b < draws.size(); ++b) {
        const auto c = static_cast<std::size_t>(draws[b]);
        const std::string prefix = std::to_string(b) + ":";
        for (std::size_t pos = start[c]; pos < start[c + 1]; ++pos) {
            const std::size_t i = rows_by_cluster[pos];
            const auto& obs = data.row(i);
            cols.unit.push_back(prefix + data.unit_label(obs.unit));
            cols.time.push_back(obs.time);
            cols.outcome.push_back(obs.outcome);
            cols.group.push_back(data.group_of_unit(obs.unit));
            cols.cluster.push_back(std::to_string(b));
            if (data.has_weight_column()) cols.weight.push_back(weights[i]);
            for (std::size_t j = 0; j < data.n_covariates(); ++j) cols.covariates[j].push_back(data.covariate(j)[i]);
        }
    }
    return PanelDataset::from_columns(std::move(cols));
}

BootstrapResult bootstrap_vcov(const PanelDataset& data, const EstimateFn& estimate, const InferenceSpec& spec) {
    if (spec.n_bootstraps < 2) throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least 2 replicates");
    const Eigen::VectorXd full = estimate(data);
    const Eigen::Index k = full.size();
    const int reps = spec.n_bootstraps;
    const auto n_clusters = static_cast<int>(data.n_clusters());

    std::vector<std::optional<Eigen::VectorXd>> results(static_cast<std::size_t>(reps));
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;

    auto worker = [&] {
        std::vector<int> draws(static_cast<std::size_t>(n_clusters));
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
            std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                              static_cast<std::uint32_t>(r), 0x9e3779b9u};
            std::mt19937_64 rng(seq);
            std::uniform_int_distribution<int> pick(0, n_clusters - 1);
            for (auto& d : draws) d = pick(rng);
            try {
                Eigen::VectorXd v = estimate(resample_clusters(data, draws));
                if (v.size() == k && v.allFinite()) results[static_cast<std::size_t>(r)] = std::move(v);
            } catch (const Error&) {
                // Counted as a failed replicate below.
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };

    int threads = spec.threads > 0 ? spec.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, reps);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    BootstrapResult out;
    out.n_reps = reps;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
    int ok = 0;
    for (const auto& r : results) {
        if (r) {
            mean += *r;
            ++ok;
        }
    }
    out.n_failed = reps - ok;
    if (out.n_failed * 5 > reps || ok < 2) {
        throw Error(ErrorCode::TooManyFailedReplicates,
                    std::to_string(out.n_failed) + " of " + std::to_string(reps) + " bootstrap replicates failed");
    }
    mean /= ok;
    out.vcov = Eigen::MatrixXd::Zero(k, k);
    for (const auto& r : results) {
        if (r) {
            const Eigen::VectorXd d = *r - mean;
            out.vcov += d * d.transpose();
        }
    }
    out.vcov /= (ok - 1);
    return out;
}

}  // namespace tsdid
