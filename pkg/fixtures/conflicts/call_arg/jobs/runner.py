def run_job(job, payload):
    return job(payload)


def double(x):
    return x * 2


def main():
    return run_job(double, 21)
