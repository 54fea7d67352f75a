"""Regenerates the small synthetic forum used by the tests and the CLI demo.

Three yearly slices over one population of 90 accounts. Replies favour
partners on the same partisan side, so the fits have something to find.
Run from this directory: python3 generate.py
"""
import random

TOPICS = ["Business", "Politics", "Worldpost", "Entertainment", "Healthy Living",
          "Crime", "Sports", "Travel", "Green", "Tech", "Arts", "Media", "Style",
          "Weird News", "Religion"]
TITLES = ["Oscar 2020 Winners Full List", "Senate vote on the budget", "Stock market rally continues",
          "Police arrest suspect downtown", "New phone review", "Marathon results", ""]

SUBREDDITS = {
    # subreddit: (age, gender, affluence, partisan)
    "teenagers": (-2.0, 0.1, -0.3, 0.0), "retirement": (2.1, 0.0, 0.6, 0.2),
    "AskMen": (0.2, 1.5, 0.0, 0.1), "TwoXChromosomes": (0.0, -1.6, 0.0, -0.4),
    "personalfinance": (0.5, 0.2, 1.2, 0.1), "povertyfinance": (-0.2, -0.1, -1.4, -0.1),
    "politics": (0.3, 0.2, 0.0, -1.5), "Conservative": (0.8, 0.4, 0.3, 1.8),
    "gaming": (-1.0, 0.9, -0.2, 0.1), "gardening": (1.3, -0.5, 0.4, 0.3),
    "news": (0.4, 0.1, 0.1, -0.2), "worldnews": (0.2, 0.3, 0.2, -0.3),
    "fitness": (-0.3, 0.7, 0.5, 0.2), "cooking": (0.6, -0.7, 0.2, -0.1),
    "investing": (0.9, 0.8, 1.6, 0.6), "college": (-1.5, 0.0, -0.6, -0.6),
}
UNSCORED = ["pics", "funny"]


def main():
    rng = random.Random(20160101)
    users = [f"user{i:03d}" for i in range(90)] + ["newsbot", "AutoModerator", "lurker"]
    side = {u: rng.choice([-1, 1]) for u in users}
    subs = list(SUBREDDITS)
    left = [s for s in subs if SUBREDDITS[s][3] < 0]
    right = [s for s in subs if SUBREDDITS[s][3] >= 0]

    with open("scores.csv", "w") as f:
        f.write("subreddit,axis,score\n")
        for s, vals in SUBREDDITS.items():
            for axis, v in zip(["age", "gender", "affluence", "partisan"], vals):
                f.write(f"{s},{axis},{v}\n")
    with open("botlist.txt", "w") as f:
        f.write("AutoModerator\n")

    for year in (2014, 2015, 2016):
        posts, comments = [], []
        pid = cid = 0
        active = [u for u in users if u != "lurker"]
        for _ in range(120):
            author = rng.choice(active)
            tagged = rng.random() < 0.7
            topic = rng.choice(TOPICS) if tagged else "NA"
            posts.append((f"p{year}_{pid}", author, topic, rng.choice(TITLES)))
            pid += 1
        by_post = {p[0]: [(p[0], p[1])] for p in posts}
        for _ in range(4000):
            post = rng.choice(posts)[0]
            thread = by_post[post]
            author = rng.choice(active)
            # Prefer a parent on the author's side.
            parent = rng.choice(thread)
            for _ in range(3):
                if side[parent[1]] == side[author]:
                    break
                parent = rng.choice(thread)
            cid_s = f"c{year}_{cid}"
            cid += 1
            comments.append((cid_s, post, parent[0], author))
            thread.append((cid_s, author))
        comments.append((f"c{year}_orphan", "p_missing", "p_missing", "user000"))

        with open(f"posts_{year}.tsv", "w") as f:
            for p in posts:
                f.write("\t".join(p) + "\n")
        with open(f"comments_{year}.tsv", "w") as f:
            for c in comments:
                f.write("\t".join(c) + "\n")
        with open(f"activity_{year}.tsv", "w") as f:
            for u in users:
                home = left if side[u] < 0 else right
                picks = rng.sample(home, min(4, len(home))) + rng.sample(subs, 3) + [rng.choice(UNSCORED)]
                if u == "newsbot":
                    picks = subs
                counts = {}
                for s in picks:
                    counts[s] = counts.get(s, 0) + rng.randint(1, 40)
                for s, n in sorted(counts.items()):
                    f.write(f"{u}\t{s}\t{n}\n")

    with open("study.cfg", "w") as f:
        f.write("# Three-slice demo study over the files in this directory.\n")
        f.write('mode = "sdt"\nq = 0.25\nridge = 1e-6\nseed = 7\nscores = "scores.csv"\nbotlist = "botlist.txt"\n')
        for year in (2014, 2015, 2016):
            f.write(f'\n[[slice]]\nlabel = "{year}"\nposts = "posts_{year}.tsv"\n'
                    f'comments = "comments_{year}.tsv"\nactivity = "activity_{year}.tsv"\n')


if __name__ == "__main__":
    main()
