#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csghmm/hmm.hpp"
#include "csghmm/subchain.hpp"

namespace csghmm {

enum class WindowPreprocessing { None, SortWithinWindow };

/// A window's core observations as an L-vector, optionally sorted ascending
/// so that the position of a spike inside the window stops mattering.
Eigen::VectorXd embed_window(const Eigen::VectorXd& core,
                             WindowPreprocessing preprocessing);

/// Columns are the embedded windows of the partition, in center order.
Eigen::MatrixXd embed_all_windows(const ObservationSeries& y,
                                  const SubchainPartition& part,
                                  WindowPreprocessing preprocessing);

/// Fitted clustering over the partition's windows. Immutable once built;
/// every window belongs to exactly one cluster and no cluster is empty.
class ClusterModel {
 public:
  ClusterModel(Eigen::MatrixXd centroids, std::vector<std::int64_t> centers,
               std::vector<int> assignment, WindowPreprocessing preprocessing);

  int cluster_count() const { return static_cast<int>(centroids_.cols()); }
  std::int64_t window_count() const {
    return static_cast<std::int64_t>(assignment_.size());
  }
  const Eigen::MatrixXd& centroids() const { return centroids_; }
  const std::vector<std::int64_t>& centers() const { return centers_; }
  const std::vector<int>& assignment() const { return assignment_; }
  const std::vector<std::int64_t>& sizes() const { return sizes_; }
  /// Window indices belonging to cluster m, ascending.
  const std::vector<std::int64_t>& members(int m) const {
    return members_[static_cast<std::size_t>(m)];
  }
  WindowPreprocessing preprocessing() const { return preprocessing_; }

  std::string to_json() const;
  static ClusterModel from_json(const std::string& text);

 private:
  Eigen::MatrixXd centroids_;  // L x M
  std::vector<std::int64_t> centers_;
  std::vector<int> assignment_;
  std::vector<std::int64_t> sizes_;
  std::vector<std::vector<std::int64_t>> members_;
  WindowPreprocessing preprocessing_;
};

/// kmeans++ seeding: first centroid uniform over points, each subsequent one
/// drawn with probability proportional to the squared distance to the nearest
/// chosen centroid. Points are columns.
Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points, int cluster_count,
                              std::uint64_t seed);

/// Lloyd iterations from kmeans++ seeds. Empty clusters are repaired by
/// reassigning the point farthest from its current centroid. Appends the
/// within-cluster sum of squares after every iteration to objective_history
/// when given.
ClusterModel kmeans_fit(const Eigen::MatrixXd& points,
                        std::vector<std::int64_t> centers, int cluster_count,
                        std::uint64_t seed, int max_iters = 100,
                        double tol = 1e-8,
                        WindowPreprocessing preprocessing = WindowPreprocessing::None,
                        std::vector<double>* objective_history = nullptr);

double within_cluster_sum_of_squares(const Eigen::MatrixXd& points,
                                     const ClusterModel& model);

/// Embeds the partition's windows and fits the best of `restarts` kmeans runs
/// (lowest within-cluster sum of squares).
ClusterModel cluster_series_windows(const ObservationSeries& y,
                                    const SubchainPartition& part,
                                    int cluster_count, std::uint64_t seed,
                                    WindowPreprocessing preprocessing,
                                    int restarts = 1);

}  // namespace csghmm
